#include "cde/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cde/rng.hpp"

namespace cde {

namespace {

double log1p_exp(double u) {
  // log(1 + e^u) without overflow
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

double step_size_at(const SGDConfig& config, int step) {
  return config.initial_step * std::pow(0.5, step / config.halve_every);
}

std::pair<PolynomialSpec, FitReport> fit_poly_mcc(
    const Eigen::Ref<const Eigen::VectorXd>& z_cases,
    const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& controls,
    PolynomialSpec spec, double omega, double grad_tol, int max_iterations) {
  if (controls.controls_per_obs != 1 || controls.values.cols() != 1) {
    throw std::invalid_argument("fit_poly_mcc: requires exactly one control");
  }
  if (omega < 0.0) throw std::invalid_argument("fit_poly_mcc: negative ridge");
  const Eigen::Index n = z_cases.size();
  if (x.rows() != n || controls.values.rows() != n) {
    throw std::invalid_argument("fit_poly_mcc: row count mismatch");
  }
  const Eigen::Index m = spec.feature_count();

  // difference rows: features at the case minus features at its control
  Eigen::MatrixXd diff(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    diff.row(i) =
        (poly_features(z_cases(i), x.row(i).transpose(), spec) -
         poly_features(controls.values(i, 0), x.row(i).transpose(), spec))
            .transpose();
  }

  // minimize f(theta) = sum_i log(1 + exp(-d_i theta)) + omega theta'theta
  auto objective = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd eta = diff * theta;
    double f = omega * theta.squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) f += log1p_exp(-eta(i));
    return f;
  };

  const auto start = Clock::now();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
  if (spec.coefficients.size() == m) theta = spec.coefficients;

  FitReport report;
  double f = objective(theta);
  report.trace.push_back(f);
  bool converged = false;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    const Eigen::VectorXd eta = diff * theta;
    const Eigen::ArrayXd mu = (1.0 + (-eta.array()).exp()).inverse();
    Eigen::VectorXd grad =
        diff.transpose() * (mu - 1.0).matrix() + 2.0 * omega * theta;
    if (grad.lpNorm<Eigen::Infinity>() < grad_tol) {
      converged = true;
      break;
    }
    const Eigen::ArrayXd w = mu * (1.0 - mu);
    Eigen::MatrixXd hess =
        diff.transpose() * w.matrix().asDiagonal() * diff;
    hess.diagonal().array() += 2.0 * omega;
    const Eigen::VectorXd dir = hess.ldlt().solve(grad);

    // step halving keeps the objective decreasing
    double step = 1.0;
    double f_new = objective(theta - step * dir);
    int halvings = 0;
    while (!(f_new < f) && halvings < 60) {
      step *= 0.5;
      f_new = objective(theta - step * dir);
      ++halvings;
    }
    if (!(f_new < f)) break;  // no descent possible, gradient is tiny
    theta -= step * dir;
    f = f_new;
    report.trace.push_back(f);
  }

  spec.coefficients = theta;
  report.final_objective = f;
  report.converged = converged;
  report.iterations = iter;
  report.seconds = elapsed_seconds(start);
  if (!converged) {
    report.note = "newton solver hit the iteration limit before reaching "
                  "gradient tolerance";
  }
  report.config_echo = {{"omega", omega},
                        {"grad_tol", grad_tol},
                        {"max_iterations", max_iterations}};
  return {std::move(spec), std::move(report)};
}

std::pair<PolynomialSpec, FitReport> fit_poly_mcc(const Dataset& data,
                                                  const GaussianTransform& t,
                                                  const ControlSet& controls,
                                                  PolynomialSpec spec,
                                                  double omega) {
  const Eigen::VectorXd z = to_unit_batch(data.response, data.features, t);
  return fit_poly_mcc(z, data.features, controls, std::move(spec), omega);
}

namespace {

// ADAM with bias correction and halving step decay, shared by the network
// and polynomial training paths.
template <class Model>
std::pair<Model, FitReport> sgd_fit(
    const Eigen::Ref<const Eigen::VectorXd>& z_cases,
    const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& controls,
    Model model, double omega, const SGDConfig& config) {
  const Eigen::Index n = z_cases.size();
  if (x.rows() != n || controls.values.rows() != n) {
    throw std::invalid_argument("sgd fit: row count mismatch");
  }
  if (config.batch_size < 1 || config.batch_size > n) {
    throw std::invalid_argument("sgd fit: batch size must be in [1, n]");
  }
  if (omega < 0.0) throw std::invalid_argument("sgd fit: negative ridge");

  const auto start = Clock::now();
  const int M = static_cast<int>(controls.values.cols());
  Eigen::VectorXd theta = model.parameters();
  const Eigen::VectorXd mask = model.penalty_mask();
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(theta.size());

  FitReport report;
  report.trace.reserve(config.total_steps);

  Rng shuffle_rng(config.seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  int step = 0;
  std::size_t cursor = order.size();  // forces a shuffle on the first step
  while (step < config.total_steps) {
    if (cursor >= order.size()) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      cursor = 0;
    }
    const Eigen::Index b = std::min<Eigen::Index>(
        config.batch_size, static_cast<Eigen::Index>(order.size() - cursor));
    Eigen::VectorXd z_b(b);
    Eigen::MatrixXd x_b(b, x.cols());
    Eigen::MatrixXd c_b(b, M);
    for (Eigen::Index r = 0; r < b; ++r) {
      const int i = order[cursor + static_cast<std::size_t>(r)];
      z_b(r) = z_cases(i);
      x_b.row(r) = x.row(i);
      c_b.row(r) = controls.values.row(i);
    }
    cursor += static_cast<std::size_t>(b);

    // ridge scaled so an epoch of batches adds up to the full objective
    const double omega_batch =
        omega * static_cast<double>(b) / static_cast<double>(n);

    Eigen::VectorXd z_all;
    Eigen::MatrixXd x_all;
    stack_case_control(z_b, x_b, c_b, z_all, x_all);
    auto [q_all, cache] = model.forward(z_all, x_all, EvalMode::train);
    const auto terms = case_control_terms(q_all, b, M, /*want_seeds=*/true);
    const double batch_obj =
        terms.data_nll + omega_batch * penalized_sq_norm(theta, mask);
    if (!std::isfinite(batch_obj)) {
      throw FitDivergence("sgd fit: non-finite objective at step " +
                          std::to_string(step));
    }
    Eigen::VectorXd grad = model.backward(cache, terms.seeds);
    grad += 2.0 * omega_batch * (theta.array() * mask.array()).matrix();

    if constexpr (requires(Model& mm, const typename Model::Cache& cc) {
                    mm.update_running(cc);
                  }) {
      model.update_running(cache);
    }

    ++step;  // ADAM bias correction uses the 1-based step count
    adam_m = config.adam_beta1 * adam_m + (1.0 - config.adam_beta1) * grad;
    adam_v = config.adam_beta2 * adam_v.array().matrix() +
             (1.0 - config.adam_beta2) * grad.array().square().matrix();
    const double mhat_scale = 1.0 / (1.0 - std::pow(config.adam_beta1, step));
    const double vhat_scale = 1.0 / (1.0 - std::pow(config.adam_beta2, step));
    const double lr = step_size_at(config, step - 1);
    theta.array() -= lr * (adam_m.array() * mhat_scale) /
                     ((adam_v.array() * vhat_scale).sqrt() + config.adam_epsilon);
    model.set_parameters(theta);
    report.trace.push_back(batch_obj);
  }

  report.final_objective =
      nll(model, z_cases, x, controls.values, omega, EvalMode::eval);
  report.iterations = step;
  report.converged = std::isfinite(report.final_objective);
  report.seconds = elapsed_seconds(start);
  report.config_echo = nlohmann::json(config);
  report.config_echo["omega"] = omega;
  return {std::move(model), std::move(report)};
}

}  // namespace

std::pair<MlpSpec, FitReport> fit_mlp_sgd(
    const Eigen::Ref<const Eigen::VectorXd>& z_cases,
    const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& controls,
    MlpSpec spec, double omega, const SGDConfig& config) {
  return sgd_fit(z_cases, x, controls, std::move(spec), omega, config);
}

std::pair<MlpSpec, FitReport> fit_mlp_sgd(const Dataset& data,
                                          const GaussianTransform& t,
                                          const ControlSet& controls,
                                          MlpSpec spec, double omega,
                                          const SGDConfig& config) {
  const Eigen::VectorXd z = to_unit_batch(data.response, data.features, t);
  return fit_mlp_sgd(z, data.features, controls, std::move(spec), omega,
                     config);
}

std::pair<PolynomialSpec, FitReport> fit_poly_sgd(
    const Eigen::Ref<const Eigen::VectorXd>& z_cases,
    const Eigen::Ref<const Eigen::MatrixXd>& x, const ControlSet& controls,
    PolynomialSpec spec, double omega, const SGDConfig& config) {
  return sgd_fit(z_cases, x, controls, std::move(spec), omega, config);
}

void to_json(nlohmann::json& j, const FitReport& r) {
  j = nlohmann::json{{"final_objective", r.final_objective},
                     {"trace", r.trace},
                     {"seconds", r.seconds},
                     {"converged", r.converged},
                     {"iterations", r.iterations},
                     {"note", r.note},
                     {"config", r.config_echo}};
}

void to_json(nlohmann::json& j, const SGDConfig& c) {
  j = nlohmann::json{{"batch_size", c.batch_size},
                     {"total_steps", c.total_steps},
                     {"initial_step", c.initial_step},
                     {"halve_every", c.halve_every},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_epsilon", c.adam_epsilon},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SGDConfig& c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.initial_step = j.value("initial_step", c.initial_step);
  c.halve_every = j.value("halve_every", c.halve_every);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.seed = j.value("seed", c.seed);
}

}  // namespace cde
