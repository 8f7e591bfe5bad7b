#pragma once

#include <Eigen/Dense>
#include <concepts>
#include <cstdint>

#include "cde/qmodel.hpp"

namespace cde {

// M uniform control draws per observation on (0,1). Fixed once before
// optimization and reused across epochs so the objective stays constant.
struct ControlSet {
  int controls_per_obs = 1;          // M
  Eigen::MatrixXd values;            // n x M, strictly inside (0,1)
  std::uint64_t seed = 0;

  Eigen::Index n_obs() const { return values.rows(); }
};

ControlSet sample_controls(int n, int controls_per_obs, std::uint64_t seed);

// Alternative fixed-grid controls: every observation shares the same M
// equally spaced interior points.
ControlSet grid_controls(int n, int controls_per_obs);

// Per-observation softmax pieces of the objective. q_all is laid out as
// n case values followed by n*M control values (observation-major).
// data_nll = sum_i [ -q(z_i) + logsumexp over the case and its controls ];
// seeds is the gradient of data_nll with respect to q_all.
struct CaseControlTerms {
  double data_nll = 0.0;
  Eigen::VectorXd seeds;
};

CaseControlTerms case_control_terms(
    const Eigen::Ref<const Eigen::VectorXd>& q_all, Eigen::Index n, int M,
    bool want_seeds);

// Stacks cases and controls into one batch so that, for the network model,
// all rows of an observation share the batch-normalization statistics.
void stack_case_control(const Eigen::Ref<const Eigen::VectorXd>& z_cases,
                        const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::MatrixXd>& controls,
                        Eigen::VectorXd& z_all, Eigen::MatrixXd& x_all);

template <class M>
concept QFunctionLike = requires(const M& m, const Eigen::VectorXd& z,
                                 const Eigen::MatrixXd& x) {
  { m.q_values(z, x, EvalMode::eval) } -> std::convertible_to<Eigen::VectorXd>;
};

double penalized_sq_norm(const Eigen::Ref<const Eigen::VectorXd>& theta,
                         const Eigen::Ref<const Eigen::VectorXd>& mask);

namespace detail {
void check_nll_args(Eigen::Index n_z, Eigen::Index n_x, Eigen::Index n_ctrl,
                    double omega);
}

// Penalized negative log-likelihood of the case-control approximation:
//   sum_i [ -q(z_i,x_i) + log( e^{q(z_i,x_i)} + sum_k e^{q(z*_ik,x_i)} ) ]
//   + omega * ||theta||^2  over the penalized parameter set.
// For the network model the mode decides whether batch or running
// statistics standardize the pre-activations.
template <QFunctionLike M>
double nll(const M& model, const Eigen::Ref<const Eigen::VectorXd>& z_cases,
           const Eigen::Ref<const Eigen::MatrixXd>& x,
           const Eigen::Ref<const Eigen::MatrixXd>& controls, double omega,
           EvalMode mode = EvalMode::eval) {
  detail::check_nll_args(z_cases.size(), x.rows(), controls.rows(), omega);
  Eigen::VectorXd z_all;
  Eigen::MatrixXd x_all;
  stack_case_control(z_cases, x, controls, z_all, x_all);
  const Eigen::VectorXd q_all = model.q_values(z_all, x_all, mode);
  const auto terms = case_control_terms(q_all, z_cases.size(),
                                        static_cast<int>(controls.cols()),
                                        /*want_seeds=*/false);
  return terms.data_nll +
         omega * penalized_sq_norm(model.parameters(), model.penalty_mask());
}

template <QFunctionLike M>
double nll(const M& model, const Eigen::Ref<const Eigen::VectorXd>& z_cases,
           const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& cs,
           double omega, EvalMode mode = EvalMode::eval) {
  return nll(model, z_cases, x, cs.values, omega, mode);
}

// Gradient of the train-mode objective above. Optionally reports the
// objective value from the same forward pass.
template <QFunctionLike M>
Eigen::VectorXd nll_gradient(const M& model,
                             const Eigen::Ref<const Eigen::VectorXd>& z_cases,
                             const Eigen::Ref<const Eigen::MatrixXd>& x,
                             const Eigen::Ref<const Eigen::MatrixXd>& controls,
                             double omega, double* nll_out = nullptr) {
  detail::check_nll_args(z_cases.size(), x.rows(), controls.rows(), omega);
  Eigen::VectorXd z_all;
  Eigen::MatrixXd x_all;
  stack_case_control(z_cases, x, controls, z_all, x_all);
  auto [q_all, cache] = model.forward(z_all, x_all, EvalMode::train);
  const auto terms = case_control_terms(q_all, z_cases.size(),
                                        static_cast<int>(controls.cols()),
                                        /*want_seeds=*/true);
  const Eigen::VectorXd theta = model.parameters();
  const Eigen::VectorXd mask = model.penalty_mask();
  if (nll_out) {
    *nll_out = terms.data_nll + omega * penalized_sq_norm(theta, mask);
  }
  Eigen::VectorXd grad = model.backward(cache, terms.seeds);
  grad += 2.0 * omega * (theta.array() * mask.array()).matrix();
  return grad;
}

template <QFunctionLike M>
Eigen::VectorXd nll_gradient(const M& model,
                             const Eigen::Ref<const Eigen::VectorXd>& z_cases,
                             const Eigen::Ref<const Eigen::MatrixXd>& x,
                             const ControlSet& cs, double omega,
                             double* nll_out = nullptr) {
  return nll_gradient(model, z_cases, x, cs.values, omega, nll_out);
}

double nll(const QModel& model, const Eigen::Ref<const Eigen::VectorXd>& z_cases,
           const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& cs,
           double omega, EvalMode mode = EvalMode::eval);

}  // namespace cde
