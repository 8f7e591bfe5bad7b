#include "cde/transform.hpp"

#include <cmath>
#include <stdexcept>

#include "cde/numeric.hpp"

namespace cde {

double GaussianTransform::conditional_mean(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() + 1 != beta.size()) {
    throw std::invalid_argument("transform: feature vector length mismatch");
  }
  return beta(0) + beta.tail(beta.size() - 1).dot(x);
}

GaussianTransform fit_ols(const Dataset& data, double clamp_eps,
                          double sigma_floor_scale) {
  const Eigen::Index n = data.n_rows();
  const Eigen::Index p = data.n_features();
  if (n <= p + 1) {
    throw std::invalid_argument(
        "fit_ols: need more observations than covariates plus intercept (n=" +
        std::to_string(n) + ", p=" + std::to_string(p) + ")");
  }
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = data.features;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p + 1) {
    throw std::invalid_argument("fit_ols: rank-deficient design matrix");
  }
  GaussianTransform t;
  t.mode = TransformMode::gaussian;
  t.clamp_eps = clamp_eps;
  t.beta = qr.solve(data.response);

  const double rss = (data.response - design * t.beta).squaredNorm();
  const double range =
      data.response.maxCoeff() - data.response.minCoeff();
  const double floor = sigma_floor_scale * std::max(range, 1.0);
  t.sigma = std::max(std::sqrt(rss / static_cast<double>(n - p - 1)), floor);
  return t;
}

GaussianTransform make_linear_bounds(double lower, double upper,
                                     double clamp_eps) {
  if (!(upper > lower)) {
    throw std::invalid_argument("make_linear_bounds: upper must exceed lower");
  }
  GaussianTransform t;
  t.mode = TransformMode::linear_bounds;
  t.lower = lower;
  t.upper = upper;
  t.clamp_eps = clamp_eps;
  return t;
}

namespace {
double clamp_unit(double z, double eps) {
  return std::min(std::max(z, eps), 1.0 - eps);
}
}  // namespace

double to_unit(double y, const Eigen::Ref<const Eigen::VectorXd>& x,
               const GaussianTransform& t) {
  if (t.mode == TransformMode::linear_bounds) {
    return clamp_unit((y - t.lower) / (t.upper - t.lower), t.clamp_eps);
  }
  const double z = normal_cdf((y - t.conditional_mean(x)) / t.sigma);
  return clamp_unit(z, t.clamp_eps);
}

double from_unit(double z, const Eigen::Ref<const Eigen::VectorXd>& x,
                 const GaussianTransform& t) {
  if (!(z > 0.0 && z < 1.0)) {
    throw std::domain_error("from_unit: z must lie in (0,1)");
  }
  if (t.mode == TransformMode::linear_bounds) {
    return t.lower + z * (t.upper - t.lower);
  }
  return t.conditional_mean(x) + t.sigma * normal_quantile(z);
}

double density_to_original(double f_z, double y,
                           const Eigen::Ref<const Eigen::VectorXd>& x,
                           const GaussianTransform& t) {
  if (f_z < 0.0) {
    throw std::invalid_argument("density_to_original: negative density");
  }
  if (t.mode == TransformMode::linear_bounds) {
    if (y < t.lower || y > t.upper) return 0.0;
    return f_z / (t.upper - t.lower);
  }
  return f_z * normal_pdf((y - t.conditional_mean(x)) / t.sigma) / t.sigma;
}

Eigen::VectorXd to_unit_batch(const Eigen::Ref<const Eigen::VectorXd>& y,
                              const Eigen::Ref<const Eigen::MatrixXd>& x,
                              const GaussianTransform& t) {
  if (y.size() != x.rows()) {
    throw std::invalid_argument("to_unit_batch: row count mismatch");
  }
  Eigen::VectorXd z(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    z(i) = to_unit(y(i), x.row(i).transpose(), t);
  }
  return z;
}

void to_json(nlohmann::json& j, const GaussianTransform& t) {
  j = nlohmann::json{
      {"mode", t.mode == TransformMode::gaussian ? "gaussian" : "linear_bounds"},
      {"beta", std::vector<double>(t.beta.data(), t.beta.data() + t.beta.size())},
      {"sigma", t.sigma},
      {"clamp_eps", t.clamp_eps},
      {"lower", t.lower},
      {"upper", t.upper}};
}

void from_json(const nlohmann::json& j, GaussianTransform& t) {
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "gaussian") {
    t.mode = TransformMode::gaussian;
  } else if (mode == "linear_bounds") {
    t.mode = TransformMode::linear_bounds;
  } else {
    throw std::invalid_argument("unknown transform mode: " + mode);
  }
  const auto beta = j.at("beta").get<std::vector<double>>();
  t.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                             static_cast<Eigen::Index>(beta.size()));
  t.sigma = j.at("sigma").get<double>();
  t.clamp_eps = j.at("clamp_eps").get<double>();
  t.lower = j.at("lower").get<double>();
  t.upper = j.at("upper").get<double>();
}

}  // namespace cde
