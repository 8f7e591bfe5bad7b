#include "cde/qmodel.hpp"

#include <cmath>
#include <stdexcept>

#include "cde/numeric.hpp"
#include "cde/rng.hpp"

namespace cde {

// ---------------------------------------------------------------------------
// polynomial
// ---------------------------------------------------------------------------

int PolynomialSpec::feature_count() const {
  const int p = n_covariates;
  const int per_power =
      1 + p * covariate_order + (interactions ? p * (p - 1) / 2 : 0);
  return max_power * per_power;
}

PolynomialSpec make_polynomial(int max_power, int n_covariates,
                               int covariate_order, bool interactions) {
  if (max_power < 1) throw std::invalid_argument("max_power must be >= 1");
  if (covariate_order < 1 || covariate_order > 2) {
    throw std::invalid_argument("covariate_order must be 1 or 2");
  }
  PolynomialSpec spec;
  spec.max_power = max_power;
  spec.covariate_order = covariate_order;
  spec.interactions = interactions;
  spec.n_covariates = n_covariates;
  spec.coefficients = Eigen::VectorXd::Zero(spec.feature_count());
  return spec;
}

Eigen::VectorXd poly_features(double z,
                              const Eigen::Ref<const Eigen::VectorXd>& x,
                              const PolynomialSpec& spec) {
  if (x.size() != spec.n_covariates) {
    throw std::invalid_argument("poly_features: covariate length mismatch");
  }
  Eigen::VectorXd f(spec.feature_count());
  const double zc = z - 0.5;
  double zpow = 1.0;
  Eigen::Index idx = 0;
  for (int b = 1; b <= spec.max_power; ++b) {
    zpow *= zc;
    f(idx++) = zpow;
    for (int j = 0; j < spec.n_covariates; ++j) {
      double xp = 1.0;
      for (int o = 1; o <= spec.covariate_order; ++o) {
        xp *= x(j);
        f(idx++) = zpow * xp;
      }
    }
    if (spec.interactions) {
      for (int j = 0; j < spec.n_covariates; ++j) {
        for (int k = j + 1; k < spec.n_covariates; ++k) {
          f(idx++) = zpow * x(j) * x(k);
        }
      }
    }
  }
  return f;
}

double poly_q(double z, const Eigen::Ref<const Eigen::VectorXd>& x,
              const PolynomialSpec& spec) {
  if (spec.coefficients.size() != spec.feature_count()) {
    throw std::invalid_argument("poly_q: coefficient length mismatch");
  }
  return poly_features(z, x, spec).dot(spec.coefficients);
}

Eigen::VectorXd PolynomialSpec::q_values(
    const Eigen::Ref<const Eigen::VectorXd>& z,
    const Eigen::Ref<const Eigen::MatrixXd>& x, EvalMode) const {
  if (coefficients.size() != feature_count()) {
    throw std::invalid_argument("polynomial q: coefficient length mismatch");
  }
  Eigen::VectorXd q(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    q(i) = poly_features(z(i), x.row(i).transpose(), *this).dot(coefficients);
  }
  return q;
}

std::pair<Eigen::VectorXd, PolynomialSpec::Cache> PolynomialSpec::forward(
    const Eigen::Ref<const Eigen::VectorXd>& z,
    const Eigen::Ref<const Eigen::MatrixXd>& x, EvalMode) const {
  Cache features(z.size(), feature_count());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    features.row(i) = poly_features(z(i), x.row(i).transpose(), *this);
  }
  return {features * coefficients, std::move(features)};
}

Eigen::VectorXd PolynomialSpec::backward(
    const Cache& cache, const Eigen::Ref<const Eigen::VectorXd>& seeds) const {
  if (cache.rows() != seeds.size() || cache.cols() != coefficients.size()) {
    throw std::invalid_argument("polynomial backward: cache/seed mismatch");
  }
  return cache.transpose() * seeds;
}

void PolynomialSpec::set_parameters(
    const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != feature_count()) {
    throw std::invalid_argument("polynomial set_parameters: length mismatch");
  }
  coefficients = theta;
}

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

namespace {

void batchnorm_forward(const Eigen::MatrixXd& pre, const MlpBatchNorm& bn,
                       double eps, EvalMode mode, Eigen::VectorXd& mu,
                       Eigen::VectorXd& var, Eigen::MatrixXd& norm,
                       Eigen::MatrixXd& out) {
  const double m = static_cast<double>(pre.rows());
  if (mode == EvalMode::train) {
    mu = pre.colwise().mean();
    var = (pre.rowwise() - mu.transpose()).array().square().colwise().sum() / m;
  } else {
    mu = bn.running_mean;
    var = bn.running_var;
  }
  const Eigen::ArrayXd inv_std = (var.array() + eps).sqrt().inverse();
  norm = (pre.rowwise() - mu.transpose()).array().rowwise() *
         inv_std.transpose();
  out = (norm.array().rowwise() * bn.scale.transpose().array()).rowwise() +
        bn.shift.transpose().array();
}

// Gradient through train-mode batch normalization. d_out is the gradient at
// the scale/shift output; returns the gradient at the pre-activation input
// and accumulates scale/shift gradients.
Eigen::MatrixXd batchnorm_backward(const Eigen::MatrixXd& d_out,
                                   const Eigen::MatrixXd& pre,
                                   const Eigen::VectorXd& mu,
                                   const Eigen::VectorXd& var,
                                   const Eigen::MatrixXd& norm,
                                   const MlpBatchNorm& bn, double eps,
                                   Eigen::VectorXd& d_scale,
                                   Eigen::VectorXd& d_shift) {
  const double m = static_cast<double>(pre.rows());
  d_scale = (d_out.array() * norm.array()).colwise().sum();
  d_shift = d_out.colwise().sum();

  const Eigen::ArrayXd inv_std = (var.array() + eps).sqrt().inverse();
  Eigen::MatrixXd d_norm =
      d_out.array().rowwise() * bn.scale.transpose().array();
  Eigen::MatrixXd centered = pre.rowwise() - mu.transpose();

  Eigen::ArrayXd d_var =
      (d_norm.array() * centered.array()).colwise().sum().transpose() *
      (-0.5) * inv_std.pow(3);
  Eigen::ArrayXd d_mu =
      -(d_norm.array().colwise().sum().transpose()) * inv_std +
      d_var * (-2.0 / m) * centered.array().colwise().sum().transpose();

  Eigen::MatrixXd d_pre =
      (d_norm.array().rowwise() * inv_std.transpose()) +
      (centered.array().rowwise() * (d_var * (2.0 / m)).transpose());
  d_pre.array().rowwise() += (d_mu / m).transpose();
  return d_pre;
}

Eigen::MatrixXd with_bias_and_z(const Eigen::Ref<const Eigen::VectorXd>& z,
                                const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::MatrixXd in(z.size(), 2 + x.cols());
  in.col(0).setOnes();
  in.col(1) = z.array() - 0.5;
  in.rightCols(x.cols()) = x;
  return in;
}

}  // namespace

Eigen::VectorXd MlpSpec::forward(const Eigen::Ref<const Eigen::VectorXd>& z,
                                 const Eigen::Ref<const Eigen::MatrixXd>& x,
                                 EvalMode mode, MlpCache* cache) const {
  if (z.size() == 0) throw std::invalid_argument("mlp forward: empty batch");
  if (z.size() != x.rows()) {
    throw std::invalid_argument("mlp forward: z/x row mismatch");
  }
  if (x.cols() != n_covariates) {
    throw std::invalid_argument("mlp forward: covariate count mismatch");
  }
  if (mode == EvalMode::train && z.size() < 2) {
    throw std::invalid_argument(
        "mlp forward: train mode needs batch size >= 2");
  }

  const Eigen::MatrixXd in = with_bias_and_z(z, x);
  Eigen::MatrixXd pre1 = in * input_weights;

  Eigen::VectorXd mu1, var1;
  Eigen::MatrixXd norm1, bn1_out;
  if (use_batchnorm) {
    batchnorm_forward(pre1, bn1, bn_epsilon, mode, mu1, var1, norm1, bn1_out);
  } else {
    bn1_out = pre1;
  }
  Eigen::MatrixXd act1 = bn1_out.unaryExpr(
      [this](double u) { return elu(u, elu_alpha); });

  Eigen::MatrixXd hidden_in(z.size(), 1 + hidden_width);
  hidden_in.col(0).setOnes();
  hidden_in.rightCols(hidden_width) = act1;
  Eigen::MatrixXd pre2 = hidden_in * hidden_weights;

  Eigen::VectorXd mu2, var2;
  Eigen::MatrixXd norm2, bn2_out;
  if (use_batchnorm) {
    batchnorm_forward(pre2, bn2, bn_epsilon, mode, mu2, var2, norm2, bn2_out);
  } else {
    bn2_out = pre2;
  }
  Eigen::MatrixXd act2 = bn2_out.unaryExpr(
      [this](double u) { return elu(u, elu_alpha); });

  if (cache) {
    cache->z = z;
    cache->x = x;
    cache->pre1 = std::move(pre1);
    cache->mu1 = std::move(mu1);
    cache->var1 = std::move(var1);
    cache->norm1 = std::move(norm1);
    cache->bn1 = std::move(bn1_out);
    cache->act1 = act1;
    cache->pre2 = std::move(pre2);
    cache->mu2 = std::move(mu2);
    cache->var2 = std::move(var2);
    cache->norm2 = std::move(norm2);
    cache->bn2 = std::move(bn2_out);
    cache->act2 = act2;
    cache->mode = mode;
  }
  return act2 * output_weights;
}

Eigen::VectorXd MlpSpec::backward(
    const MlpCache& cache,
    const Eigen::Ref<const Eigen::VectorXd>& seeds) const {
  if (cache.mode != EvalMode::train) {
    throw std::invalid_argument("mlp backward: cache must be from train mode");
  }
  if (cache.act2.rows() != seeds.size()) {
    throw std::invalid_argument("mlp backward: seed length mismatch");
  }

  // output layer
  Eigen::VectorXd d_delta = cache.act2.transpose() * seeds;
  Eigen::MatrixXd d_act2 = seeds * output_weights.transpose();

  // through ELU at the output block
  Eigen::MatrixXd d_bn2 =
      d_act2.array() * cache.bn2.unaryExpr([this](double u) {
                             return elu_grad(u, elu_alpha);
                           }).array();

  Eigen::VectorXd d_scale2, d_shift2;
  Eigen::MatrixXd d_pre2;
  if (use_batchnorm) {
    d_pre2 = batchnorm_backward(d_bn2, cache.pre2, cache.mu2, cache.var2,
                                cache.norm2, bn2, bn_epsilon, d_scale2,
                                d_shift2);
  } else {
    d_pre2 = std::move(d_bn2);
  }

  // hidden layer weights: pre2 = [1, act1] * gamma
  Eigen::MatrixXd hidden_in(cache.act1.rows(), 1 + hidden_width);
  hidden_in.col(0).setOnes();
  hidden_in.rightCols(hidden_width) = cache.act1;
  Eigen::MatrixXd d_gamma = hidden_in.transpose() * d_pre2;
  Eigen::MatrixXd d_act1 =
      d_pre2 * hidden_weights.bottomRows(hidden_width).transpose();

  Eigen::MatrixXd d_bn1 =
      d_act1.array() * cache.bn1.unaryExpr([this](double u) {
                             return elu_grad(u, elu_alpha);
                           }).array();

  Eigen::VectorXd d_scale1, d_shift1;
  Eigen::MatrixXd d_pre1;
  if (use_batchnorm) {
    d_pre1 = batchnorm_backward(d_bn1, cache.pre1, cache.mu1, cache.var1,
                                cache.norm1, bn1, bn_epsilon, d_scale1,
                                d_shift1);
  } else {
    d_pre1 = std::move(d_bn1);
  }

  Eigen::MatrixXd in = with_bias_and_z(cache.z, cache.x);
  Eigen::MatrixXd d_beta = in.transpose() * d_pre1;

  Eigen::VectorXd grad(num_params());
  Eigen::Index off = 0;
  grad.segment(off, d_beta.size()) =
      Eigen::Map<const Eigen::VectorXd>(d_beta.data(), d_beta.size());
  off += d_beta.size();
  grad.segment(off, d_gamma.size()) =
      Eigen::Map<const Eigen::VectorXd>(d_gamma.data(), d_gamma.size());
  off += d_gamma.size();
  grad.segment(off, d_delta.size()) = d_delta;
  off += d_delta.size();
  if (use_batchnorm) {
    grad.segment(off, hidden_width) = d_scale1;
    off += hidden_width;
    grad.segment(off, hidden_width) = d_shift1;
    off += hidden_width;
    grad.segment(off, output_width) = d_scale2;
    off += output_width;
    grad.segment(off, output_width) = d_shift2;
    off += output_width;
  }
  return grad;
}

void MlpSpec::update_running(const MlpCache& cache) {
  if (!use_batchnorm) return;
  if (cache.mode != EvalMode::train) {
    throw std::invalid_argument("update_running: cache must be from train mode");
  }
  const double keep = bn_momentum;
  bn1.running_mean = keep * bn1.running_mean + (1.0 - keep) * cache.mu1;
  bn1.running_var = keep * bn1.running_var + (1.0 - keep) * cache.var1;
  bn2.running_mean = keep * bn2.running_mean + (1.0 - keep) * cache.mu2;
  bn2.running_var = keep * bn2.running_var + (1.0 - keep) * cache.var2;
}

Eigen::Index MlpSpec::num_params() const {
  Eigen::Index n = input_weights.size() + hidden_weights.size() +
                   output_weights.size();
  if (use_batchnorm) n += 2 * (hidden_width + output_width);
  return n;
}

Eigen::VectorXd MlpSpec::parameters() const {
  Eigen::VectorXd theta(num_params());
  Eigen::Index off = 0;
  theta.segment(off, input_weights.size()) = Eigen::Map<const Eigen::VectorXd>(
      input_weights.data(), input_weights.size());
  off += input_weights.size();
  theta.segment(off, hidden_weights.size()) =
      Eigen::Map<const Eigen::VectorXd>(hidden_weights.data(),
                                        hidden_weights.size());
  off += hidden_weights.size();
  theta.segment(off, output_weights.size()) = output_weights;
  off += output_weights.size();
  if (use_batchnorm) {
    theta.segment(off, hidden_width) = bn1.scale;
    off += hidden_width;
    theta.segment(off, hidden_width) = bn1.shift;
    off += hidden_width;
    theta.segment(off, output_width) = bn2.scale;
    off += output_width;
    theta.segment(off, output_width) = bn2.shift;
    off += output_width;
  }
  return theta;
}

void MlpSpec::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != num_params()) {
    throw std::invalid_argument("mlp set_parameters: length mismatch");
  }
  Eigen::Index off = 0;
  Eigen::Map<Eigen::VectorXd>(input_weights.data(), input_weights.size()) =
      theta.segment(off, input_weights.size());
  off += input_weights.size();
  Eigen::Map<Eigen::VectorXd>(hidden_weights.data(), hidden_weights.size()) =
      theta.segment(off, hidden_weights.size());
  off += hidden_weights.size();
  output_weights = theta.segment(off, output_weights.size());
  off += output_weights.size();
  if (use_batchnorm) {
    bn1.scale = theta.segment(off, hidden_width);
    off += hidden_width;
    bn1.shift = theta.segment(off, hidden_width);
    off += hidden_width;
    bn2.scale = theta.segment(off, output_width);
    off += output_width;
    bn2.shift = theta.segment(off, output_width);
    off += output_width;
  }
}

Eigen::VectorXd MlpSpec::penalty_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(num_params());
  if (use_batchnorm) {
    Eigen::Index off =
        input_weights.size() + hidden_weights.size() + output_weights.size();
    mask.segment(off + hidden_width, hidden_width).setZero();  // bn1 shift
    mask.segment(off + 2 * hidden_width + output_width, output_width)
        .setZero();  // bn2 shift
  }
  return mask;
}

MlpSpec mlp_init_he(int hidden_width, int output_width, int n_covariates,
                    std::uint64_t seed, double elu_alpha, bool use_batchnorm) {
  if (hidden_width < 1 || output_width < 1) {
    throw std::invalid_argument("mlp_init_he: widths must be >= 1");
  }
  MlpSpec spec;
  spec.hidden_width = hidden_width;
  spec.output_width = output_width;
  spec.n_covariates = n_covariates;
  spec.elu_alpha = elu_alpha;
  spec.use_batchnorm = use_batchnorm;

  Rng rng(seed);
  auto he_fill = [&rng](Eigen::Ref<Eigen::MatrixXd> w, int fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
    }
  };

  spec.input_weights = Eigen::MatrixXd::Zero(2 + n_covariates, hidden_width);
  he_fill(spec.input_weights.bottomRows(1 + n_covariates), 1 + n_covariates);

  spec.hidden_weights = Eigen::MatrixXd::Zero(1 + hidden_width, output_width);
  he_fill(spec.hidden_weights.bottomRows(hidden_width), hidden_width);

  spec.output_weights.resize(output_width);
  {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / output_width));
    for (Eigen::Index t = 0; t < output_width; ++t) {
      spec.output_weights(t) = dist(rng);
    }
  }

  auto init_bn = [](MlpBatchNorm& bn, int width) {
    bn.scale = Eigen::VectorXd::Ones(width);
    bn.shift = Eigen::VectorXd::Zero(width);
    bn.running_mean = Eigen::VectorXd::Zero(width);
    bn.running_var = Eigen::VectorXd::Ones(width);
  };
  init_bn(spec.bn1, hidden_width);
  init_bn(spec.bn2, output_width);
  return spec;
}

std::pair<Eigen::VectorXd, MlpCache> mlp_forward(
    const Eigen::Ref<const Eigen::VectorXd>& z,
    const Eigen::Ref<const Eigen::MatrixXd>& x, MlpSpec& spec, EvalMode mode) {
  std::pair<Eigen::VectorXd, MlpCache> out;
  out.first = spec.forward(z, x, mode, &out.second);
  if (mode == EvalMode::train) spec.update_running(out.second);
  return out;
}

Eigen::VectorXd mlp_backward(const MlpCache& cache,
                             const Eigen::Ref<const Eigen::VectorXd>& dq,
                             const MlpSpec& spec) {
  return spec.backward(cache, dq);
}

Eigen::VectorXd q_values(const QModel& model,
                         const Eigen::Ref<const Eigen::VectorXd>& z,
                         const Eigen::Ref<const Eigen::MatrixXd>& x,
                         EvalMode mode) {
  return std::visit(
      [&](const auto& m) { return m.q_values(z, x, mode); }, model);
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {
std::vector<double> flat(const Eigen::MatrixXd& m) {
  return {m.data(), m.data() + m.size()};
}
std::vector<double> flat(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}
Eigen::VectorXd unflat_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}
Eigen::MatrixXd unflat_mat(const std::vector<double>& v, Eigen::Index rows,
                           Eigen::Index cols) {
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
    throw std::invalid_argument("model json: flattened matrix size mismatch");
  }
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}
}  // namespace

void to_json(nlohmann::json& j, const PolynomialSpec& spec) {
  j = nlohmann::json{{"type", "polynomial"},
                     {"max_power", spec.max_power},
                     {"covariate_order", spec.covariate_order},
                     {"interactions", spec.interactions},
                     {"n_covariates", spec.n_covariates},
                     {"coefficients", flat(spec.coefficients)}};
}

void from_json(const nlohmann::json& j, PolynomialSpec& spec) {
  spec.max_power = j.at("max_power").get<int>();
  spec.covariate_order = j.at("covariate_order").get<int>();
  spec.interactions = j.at("interactions").get<bool>();
  spec.n_covariates = j.at("n_covariates").get<int>();
  spec.coefficients = unflat_vec(j.at("coefficients").get<std::vector<double>>());
  if (spec.coefficients.size() != spec.feature_count()) {
    throw std::invalid_argument("polynomial json: coefficient length mismatch");
  }
}

namespace {
nlohmann::json bn_to_json(const MlpBatchNorm& bn) {
  return {{"scale", flat(bn.scale)},
          {"shift", flat(bn.shift)},
          {"running_mean", flat(bn.running_mean)},
          {"running_var", flat(bn.running_var)}};
}
MlpBatchNorm bn_from_json(const nlohmann::json& j) {
  MlpBatchNorm bn;
  bn.scale = unflat_vec(j.at("scale").get<std::vector<double>>());
  bn.shift = unflat_vec(j.at("shift").get<std::vector<double>>());
  bn.running_mean = unflat_vec(j.at("running_mean").get<std::vector<double>>());
  bn.running_var = unflat_vec(j.at("running_var").get<std::vector<double>>());
  return bn;
}
}  // namespace

void to_json(nlohmann::json& j, const MlpSpec& spec) {
  j = nlohmann::json{{"type", "mlp"},
                     {"hidden_width", spec.hidden_width},
                     {"output_width", spec.output_width},
                     {"n_covariates", spec.n_covariates},
                     {"elu_alpha", spec.elu_alpha},
                     {"use_batchnorm", spec.use_batchnorm},
                     {"bn_epsilon", spec.bn_epsilon},
                     {"bn_momentum", spec.bn_momentum},
                     {"input_weights", flat(spec.input_weights)},
                     {"hidden_weights", flat(spec.hidden_weights)},
                     {"output_weights", flat(spec.output_weights)},
                     {"bn1", bn_to_json(spec.bn1)},
                     {"bn2", bn_to_json(spec.bn2)}};
}

void from_json(const nlohmann::json& j, MlpSpec& spec) {
  spec.hidden_width = j.at("hidden_width").get<int>();
  spec.output_width = j.at("output_width").get<int>();
  spec.n_covariates = j.at("n_covariates").get<int>();
  spec.elu_alpha = j.at("elu_alpha").get<double>();
  spec.use_batchnorm = j.at("use_batchnorm").get<bool>();
  spec.bn_epsilon = j.at("bn_epsilon").get<double>();
  spec.bn_momentum = j.at("bn_momentum").get<double>();
  spec.input_weights =
      unflat_mat(j.at("input_weights").get<std::vector<double>>(),
                 2 + spec.n_covariates, spec.hidden_width);
  spec.hidden_weights =
      unflat_mat(j.at("hidden_weights").get<std::vector<double>>(),
                 1 + spec.hidden_width, spec.output_width);
  spec.output_weights =
      unflat_vec(j.at("output_weights").get<std::vector<double>>());
  spec.bn1 = bn_from_json(j.at("bn1"));
  spec.bn2 = bn_from_json(j.at("bn2"));
}

nlohmann::json qmodel_to_json(const QModel& model) {
  return std::visit([](const auto& m) { return nlohmann::json(m); }, model);
}

QModel qmodel_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "polynomial") return j.get<PolynomialSpec>();
  if (type == "mlp") return j.get<MlpSpec>();
  throw std::invalid_argument("unknown model type: " + type);
}

}  // namespace cde
