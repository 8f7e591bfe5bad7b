#pragma once

#include <Eigen/Dense>
#include <functional>
#include <json.hpp>
#include <string>

namespace cde {

using CdfFunction = std::function<double(double)>;

struct ScoreReport {
  std::string label;
  Eigen::VectorXd per_observation;
  double mean = 0.0;
  double se = 0.0;  // across folds or replicates, filled by the harness
  int grid_points = 1000;
  double lower = 0.0;
  double upper = 1.0;
};

void to_json(nlohmann::json& j, const ScoreReport& r);

// Range-normalized continuous ranked probability score against the
// observation's step function, left-endpoint Riemann sum on grid_points
// evenly spaced points of [l,u]:
//   (1/grid_points) * sum_g ( F(y_g) - I(y_g >= y_obs) )^2
double crps(const CdfFunction& cdf, double y_obs, double l, double u,
            int grid_points = 1000);

// Same quadrature of the squared gap between two CDFs.
double crps_divergence(const CdfFunction& estimate, const CdfFunction& truth,
                       double l, double u, int grid_points = 1000);

// Known conditional distributions of the synthetic scenarios, one row of
// parameters per observation:
//   model 1: {mean, sd}
//   models 2 and 3: {m1, s1, m2, s2}, equal-weight two-component mixture
//   model 4: {location, scale, alpha}, skew-normal errors
struct TrueConditional {
  int model_id = 1;
  Eigen::MatrixXd params;

  Eigen::Index n_rows() const { return params.rows(); }
};

double true_cdf(const TrueConditional& tc, Eigen::Index row, double y);

// Skew-normal CDF by adaptive quadrature of 2*phi(t)*Phi(alpha*t).
double skewnormal_cdf(double y, double location, double scale, double alpha);

void to_json(nlohmann::json& j, const TrueConditional& tc);
void from_json(const nlohmann::json& j, TrueConditional& tc);

}  // namespace cde
