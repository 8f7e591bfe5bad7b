#include "cde/casecontrol.hpp"

#include <cmath>
#include <stdexcept>

#include "cde/rng.hpp"

namespace cde {

ControlSet sample_controls(int n, int controls_per_obs, std::uint64_t seed) {
  if (n < 1 || controls_per_obs < 1) {
    throw std::invalid_argument("sample_controls: n and M must be >= 1");
  }
  ControlSet cs;
  cs.controls_per_obs = controls_per_obs;
  cs.seed = seed;
  cs.values.resize(n, controls_per_obs);
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(
      std::numeric_limits<double>::min(), 1.0);
  for (Eigen::Index i = 0; i < cs.values.rows(); ++i) {
    for (Eigen::Index k = 0; k < cs.values.cols(); ++k) {
      cs.values(i, k) = unif(rng);
    }
  }
  return cs;
}

ControlSet grid_controls(int n, int controls_per_obs) {
  if (n < 1 || controls_per_obs < 1) {
    throw std::invalid_argument("grid_controls: n and M must be >= 1");
  }
  ControlSet cs;
  cs.controls_per_obs = controls_per_obs;
  cs.values.resize(n, controls_per_obs);
  for (Eigen::Index k = 0; k < controls_per_obs; ++k) {
    // midpoints of M equal cells of (0,1)
    cs.values.col(k).setConstant((k + 0.5) / controls_per_obs);
  }
  return cs;
}

void stack_case_control(const Eigen::Ref<const Eigen::VectorXd>& z_cases,
                        const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::MatrixXd>& controls,
                        Eigen::VectorXd& z_all, Eigen::MatrixXd& x_all) {
  const Eigen::Index n = z_cases.size();
  const Eigen::Index m = controls.cols();
  z_all.resize(n * (1 + m));
  x_all.resize(n * (1 + m), x.cols());
  z_all.head(n) = z_cases;
  x_all.topRows(n) = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index row = n + i * m + k;
      z_all(row) = controls(i, k);
      x_all.row(row) = x.row(i);
    }
  }
}

CaseControlTerms case_control_terms(
    const Eigen::Ref<const Eigen::VectorXd>& q_all, Eigen::Index n, int M,
    bool want_seeds) {
  if (q_all.size() != n * (1 + M)) {
    throw std::invalid_argument("case_control_terms: layout mismatch");
  }
  CaseControlTerms out;
  if (want_seeds) out.seeds = Eigen::VectorXd::Zero(q_all.size());

  for (Eigen::Index i = 0; i < n; ++i) {
    const double q_case = q_all(i);
    double mx = q_case;
    for (int k = 0; k < M; ++k) mx = std::max(mx, q_all(n + i * M + k));

    double denom = std::exp(q_case - mx);
    for (int k = 0; k < M; ++k) denom += std::exp(q_all(n + i * M + k) - mx);
    out.data_nll += -q_case + mx + std::log(denom);

    if (want_seeds) {
      // softmax weights over {case, controls}; the upstream gradients are
      // w_case - 1 on the case and w_k on each control, summing to zero.
      const double w_case = std::exp(q_case - mx) / denom;
      out.seeds(i) = w_case - 1.0;
      for (int k = 0; k < M; ++k) {
        out.seeds(n + i * M + k) = std::exp(q_all(n + i * M + k) - mx) / denom;
      }
    }
  }
  return out;
}

double penalized_sq_norm(const Eigen::Ref<const Eigen::VectorXd>& theta,
                         const Eigen::Ref<const Eigen::VectorXd>& mask) {
  if (theta.size() != mask.size()) {
    throw std::invalid_argument("penalized_sq_norm: mask length mismatch");
  }
  return (theta.array().square() * mask.array()).sum();
}

namespace detail {
void check_nll_args(Eigen::Index n_z, Eigen::Index n_x, Eigen::Index n_ctrl,
                    double omega) {
  if (n_z != n_x || n_z != n_ctrl) {
    throw std::invalid_argument("nll: row count mismatch");
  }
  if (n_z < 1) throw std::invalid_argument("nll: empty data");
  if (omega < 0.0) throw std::invalid_argument("nll: negative ridge weight");
}
}  // namespace detail

double nll(const QModel& model, const Eigen::Ref<const Eigen::VectorXd>& z_cases,
           const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& cs,
           double omega, EvalMode mode) {
  return std::visit(
      [&](const auto& m) { return nll(m, z_cases, x, cs.values, omega, mode); },
      model);
}

}  // namespace cde
