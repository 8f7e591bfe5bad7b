#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "cde/dataset.hpp"
#include "cde/eval.hpp"
#include "cde/rng.hpp"

namespace cde {

// Synthetic benchmark scenarios:
//   1: linear mean, covariate-dependent log-scale Gaussian noise, 5 features
//   2: equal mixture of two nonlinear means, 10 uniform features (5 inert)
//   3: equal mixture of two sine curves, a single uniform feature on [0,10]
//   4: nonlinear mean with skew-normal errors, 10 uniform features (5 inert)
struct ScenarioConfig {
  int model_id = 1;
  int n = 200;
  std::uint64_t seed = 0;
  double train_fraction = 0.75;
};

struct SimulatedData {
  Dataset train;
  Dataset test;
  TrueConditional truth;  // one row per test observation
};

SimulatedData generate(const ScenarioConfig& config);

// test hook: scenario 1 with fixed coefficient vectors instead of the
// per-replicate draws
SimulatedData generate_model1_with(const Eigen::VectorXd& beta1,
                                   const Eigen::VectorXd& beta2,
                                   const ScenarioConfig& config);

// Draw from SkewNormal(location, scale, alpha) via the two-Gaussian
// representation delta*|U0| + sqrt(1-delta^2)*V.
Eigen::VectorXd sample_skewnormal(double location, double scale, double alpha,
                                  int n, std::uint64_t seed);

// One response draw from the conditional law recorded in a TrueConditional
// row; the same sampler generate() uses to produce responses.
double sample_conditional(const TrueConditional& tc, Eigen::Index row,
                          Rng& rng);

}  // namespace cde
