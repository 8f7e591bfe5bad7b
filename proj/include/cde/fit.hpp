#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cde/casecontrol.hpp"
#include "cde/dataset.hpp"
#include "cde/qmodel.hpp"
#include "cde/transform.hpp"

namespace cde {

struct SGDConfig {
  int batch_size = 50;
  int total_steps = 600;
  double initial_step = 1.0;
  int halve_every = 100;  // steps between halvings of the step size
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
};

struct FitReport {
  double final_objective = 0.0;
  std::vector<double> trace;  // per Newton iteration / per SGD step
  double seconds = 0.0;
  bool converged = true;
  int iterations = 0;
  std::string note;
  nlohmann::json config_echo;
};

void to_json(nlohmann::json& j, const FitReport& r);

// Thrown when SGD hits a non-finite objective.
struct FitDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double step_size_at(const SGDConfig& config, int step);

// Ridge-penalized logistic regression on the per-observation difference
// rows features(z_i) - features(z*_i1), solved by damped Newton iterations
// with step halving. Requires M = 1.
std::pair<PolynomialSpec, FitReport> fit_poly_mcc(
    const Eigen::Ref<const Eigen::VectorXd>& z_cases,
    const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& controls,
    PolynomialSpec spec, double omega, double grad_tol = 1e-8,
    int max_iterations = 100);

std::pair<PolynomialSpec, FitReport> fit_poly_mcc(const Dataset& data,
                                                  const GaussianTransform& t,
                                                  const ControlSet& controls,
                                                  PolynomialSpec spec,
                                                  double omega);

// Mini-batch ADAM with step decay on the case-control objective. Each batch
// is the selected case rows plus their control rows; the ridge term is
// scaled by batch_size/n so an epoch's batches sum to the full objective.
std::pair<MlpSpec, FitReport> fit_mlp_sgd(
    const Eigen::Ref<const Eigen::VectorXd>& z_cases,
    const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& controls,
    MlpSpec spec, double omega, const SGDConfig& config);

std::pair<MlpSpec, FitReport> fit_mlp_sgd(const Dataset& data,
                                          const GaussianTransform& t,
                                          const ControlSet& controls,
                                          MlpSpec spec, double omega,
                                          const SGDConfig& config);

// The same optimizer over the polynomial model; used to cross-check the
// Newton solver against gradient descent on the identical objective.
std::pair<PolynomialSpec, FitReport> fit_poly_sgd(
    const Eigen::Ref<const Eigen::VectorXd>& z_cases,
    const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& controls,
    PolynomialSpec spec, double omega, const SGDConfig& config);

void to_json(nlohmann::json& j, const SGDConfig& c);
void from_json(const nlohmann::json& j, SGDConfig& c);

}  // namespace cde
