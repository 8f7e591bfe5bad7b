#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include "cde/dataset.hpp"

namespace cde {

enum class TransformMode { gaussian, linear_bounds };

// Maps the response onto the unit interval. In gaussian mode
// z = Phi((y - [1,x]·beta) / sigma) with beta, sigma estimated by OLS;
// in linear_bounds mode [lower,upper] is mapped affinely onto [0,1].
// Outputs are clamped to [clamp_eps, 1-clamp_eps].
struct GaussianTransform {
  TransformMode mode = TransformMode::gaussian;
  Eigen::VectorXd beta;  // intercept first, then one slope per feature
  double sigma = 1.0;
  double clamp_eps = 1e-6;
  double lower = 0.0;  // linear_bounds only
  double upper = 1.0;

  double conditional_mean(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

// OLS fit with intercept; sigma = sqrt(RSS / (n - p - 1)) floored at
// sigma_floor_scale * (response range) so noiseless data stays usable.
GaussianTransform fit_ols(const Dataset& data, double clamp_eps = 1e-6,
                          double sigma_floor_scale = 1e-8);

GaussianTransform make_linear_bounds(double lower, double upper,
                                     double clamp_eps = 1e-6);

double to_unit(double y, const Eigen::Ref<const Eigen::VectorXd>& x,
               const GaussianTransform& t);
double from_unit(double z, const Eigen::Ref<const Eigen::VectorXd>& x,
                 const GaussianTransform& t);

// Change of variable back to the original scale:
// h(y|x) = f_z(G(y|x)) * |dG/dy|.
double density_to_original(double f_z, double y,
                           const Eigen::Ref<const Eigen::VectorXd>& x,
                           const GaussianTransform& t);

Eigen::VectorXd to_unit_batch(const Eigen::Ref<const Eigen::VectorXd>& y,
                              const Eigen::Ref<const Eigen::MatrixXd>& x,
                              const GaussianTransform& t);

void to_json(nlohmann::json& j, const GaussianTransform& t);
void from_json(const nlohmann::json& j, GaussianTransform& t);

}  // namespace cde
