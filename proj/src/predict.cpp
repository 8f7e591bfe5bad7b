#include "cde/predict.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cde {

ResponseRange response_range(const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y.size() == 0) throw std::invalid_argument("response_range: empty");
  return ResponseRange{y.minCoeff(), y.maxCoeff()};
}

Eigen::VectorXd softmax_probabilities(
    const Eigen::Ref<const Eigen::VectorXd>& q) {
  const double m = q.maxCoeff();
  Eigen::VectorXd p = (q.array() - m).exp();
  p /= p.sum();
  return p;
}

DensityEstimate predict_grid(const QModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x, int L,
                             GridMode mode, const GaussianTransform& t,
                             const ResponseRange& range) {
  if (L < 2) throw std::invalid_argument("predict_grid: L must be >= 2");

  DensityEstimate de;
  de.z_grid.resize(L);
  de.y_grid.resize(L);
  if (mode == GridMode::quantile) {
    for (int l = 0; l < L; ++l) {
      const double z = 0.005 + 0.99 * static_cast<double>(l) / (L - 1);
      de.z_grid(l) = z;
      de.y_grid(l) = from_unit(z, x, t);
    }
  } else {
    const double lo = range.extended_lo();
    const double hi = range.extended_hi();
    for (int l = 0; l < L; ++l) {
      const double y = lo + (hi - lo) * static_cast<double>(l) / (L - 1);
      de.y_grid(l) = y;
      de.z_grid(l) = to_unit(y, x, t);
    }
  }

  Eigen::MatrixXd x_rep(L, x.size());
  x_rep.rowwise() = x.transpose();
  const Eigen::VectorXd q = q_values(model, de.z_grid, x_rep, EvalMode::eval);
  de.probabilities = softmax_probabilities(q);

  de.cdf.resize(L);
  double acc = 0.0;
  for (int l = 0; l < L; ++l) {
    acc += de.probabilities(l);
    de.cdf(l) = acc;
  }
  de.cdf(L - 1) = 1.0;
  return de;
}

Eigen::VectorXd density_on_y(const DensityEstimate& de,
                             const GaussianTransform& t,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index L = de.z_grid.size();
  if (L < 2) throw std::invalid_argument("density_on_y: degenerate grid");
  Eigen::VectorXd h(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    double width;
    if (l == 0) {
      width = de.z_grid(1) - de.z_grid(0);
    } else if (l == L - 1) {
      width = de.z_grid(L - 1) - de.z_grid(L - 2);
    } else {
      width = 0.5 * (de.z_grid(l + 1) - de.z_grid(l - 1));
    }
    if (!(width > 0.0)) {
      throw std::invalid_argument("density_on_y: degenerate z cell width");
    }
    const double f_z = de.probabilities(l) / width;
    h(l) = density_to_original(f_z, de.y_grid(l), x, t);
  }
  return h;
}

double cdf_at(const DensityEstimate& de, double y) {
  const Eigen::Index L = de.y_grid.size();
  if (y < de.y_grid(0)) return 0.0;
  if (y >= de.y_grid(L - 1)) return 1.0;
  const double* begin = de.y_grid.data();
  const Eigen::Index hi = std::lower_bound(begin + 1, begin + L, y) - begin;
  const Eigen::Index lo = hi - 1;
  const double t = (y - de.y_grid(lo)) / (de.y_grid(hi) - de.y_grid(lo));
  return de.cdf(lo) + t * (de.cdf(hi) - de.cdf(lo));
}

}  // namespace cde
