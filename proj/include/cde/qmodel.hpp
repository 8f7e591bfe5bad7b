#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <utility>
#include <variant>

namespace cde {

enum class EvalMode { train, eval };

// ---------------------------------------------------------------------------
// Polynomial model
//
// q(z,x) = sum over powers b = 1..B of
//   (z-0.5)^b * xi_b0
//   + (z-0.5)^b * x_j^o * xi_bjo        for j = 1..p, o = 1..O
//   + (z-0.5)^b * x_j * x_k * ups_bl    for j < k, when interactions are on.
//
// The feature layout is fixed: powers outermost; within a power the constant
// term, then covariates (j outer, o inner), then interaction pairs in
// lexicographic order. Coefficients are stored flat in the same order.
// Every term carries a (z-0.5)^b factor, so covariate-only main effects are
// structurally absent and all features vanish at z = 0.5.
// ---------------------------------------------------------------------------
struct PolynomialSpec {
  int max_power = 3;        // B
  int covariate_order = 2;  // O, 1 or 2
  bool interactions = false;
  int n_covariates = 0;  // p
  Eigen::VectorXd coefficients;

  using Cache = Eigen::MatrixXd;  // rows = feature vectors

  int feature_count() const;

  Eigen::VectorXd q_values(const Eigen::Ref<const Eigen::VectorXd>& z,
                           const Eigen::Ref<const Eigen::MatrixXd>& x,
                           EvalMode mode = EvalMode::eval) const;
  std::pair<Eigen::VectorXd, Cache> forward(
      const Eigen::Ref<const Eigen::VectorXd>& z,
      const Eigen::Ref<const Eigen::MatrixXd>& x,
      EvalMode mode = EvalMode::train) const;
  // gradient of sum_i seeds_i * q_i with respect to the coefficients
  Eigen::VectorXd backward(const Cache& cache,
                           const Eigen::Ref<const Eigen::VectorXd>& seeds) const;

  Eigen::VectorXd parameters() const { return coefficients; }
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& theta);
  Eigen::VectorXd penalty_mask() const {
    return Eigen::VectorXd::Ones(coefficients.size());
  }
};

// Returns a spec with zeroed coefficients of the right length.
PolynomialSpec make_polynomial(int max_power, int n_covariates,
                               int covariate_order, bool interactions);

Eigen::VectorXd poly_features(double z,
                              const Eigen::Ref<const Eigen::VectorXd>& x,
                              const PolynomialSpec& spec);
double poly_q(double z, const Eigen::Ref<const Eigen::VectorXd>& x,
              const PolynomialSpec& spec);

// ---------------------------------------------------------------------------
// Feed-forward network
//
//   I_r = beta_0r + beta_1r (z-0.5) + sum_j beta_jr x_j
//   A_r = ELU(BN(I_r))
//   H_t = gamma_0t + sum_r gamma_tr A_r
//   q   = sum_t delta_t ELU(BN(H_t))
//
// Batch normalization is applied to the pre-activations of both blocks,
// before ELU. Train mode standardizes with batch statistics; eval mode uses
// the running moments.
//
// Parameter vector layout (flattened): input_weights column-major
// ((2+p) x R), hidden_weights column-major ((1+R) x T), output_weights (T),
// then, when batchnorm is enabled, bn1 scale (R), bn1 shift (R), bn2 scale
// (T), bn2 shift (T). Running moments are state, not parameters.
// ---------------------------------------------------------------------------
struct MlpBatchNorm {
  Eigen::VectorXd scale;  // init 1
  Eigen::VectorXd shift;  // init 0
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

struct MlpCache {
  Eigen::VectorXd z;
  Eigen::MatrixXd x;
  Eigen::MatrixXd pre1;    // I, n x R
  Eigen::VectorXd mu1, var1;
  Eigen::MatrixXd norm1;   // (I - mu)/sqrt(var+eps)
  Eigen::MatrixXd bn1;     // scale*norm + shift
  Eigen::MatrixXd act1;    // ELU(bn1)
  Eigen::MatrixXd pre2;    // H, n x T
  Eigen::VectorXd mu2, var2;
  Eigen::MatrixXd norm2;
  Eigen::MatrixXd bn2;
  Eigen::MatrixXd act2;    // ELU(bn2)
  EvalMode mode = EvalMode::train;
};

struct MlpSpec {
  int hidden_width = 30;  // R
  int output_width = 30;  // T
  int n_covariates = 0;   // p
  double elu_alpha = 1.0;
  bool use_batchnorm = true;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;  // fraction of the old running moment kept
  Eigen::MatrixXd input_weights;   // (2+p) x R: bias, z term, covariates
  Eigen::MatrixXd hidden_weights;  // (1+R) x T: bias then hidden activations
  Eigen::VectorXd output_weights;  // T
  MlpBatchNorm bn1;  // over I columns
  MlpBatchNorm bn2;  // over H columns

  using Cache = MlpCache;

  // Pure forward pass; never touches the running moments. Train mode uses
  // batch statistics and requires batch size >= 2.
  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& z,
                          const Eigen::Ref<const Eigen::MatrixXd>& x,
                          EvalMode mode, MlpCache* cache = nullptr) const;
  Eigen::VectorXd q_values(const Eigen::Ref<const Eigen::VectorXd>& z,
                           const Eigen::Ref<const Eigen::MatrixXd>& x,
                           EvalMode mode = EvalMode::eval) const {
    return forward(z, x, mode, nullptr);
  }
  std::pair<Eigen::VectorXd, Cache> forward(
      const Eigen::Ref<const Eigen::VectorXd>& z,
      const Eigen::Ref<const Eigen::MatrixXd>& x,
      EvalMode mode = EvalMode::train) const {
    std::pair<Eigen::VectorXd, Cache> out;
    out.first = forward(z, x, mode, &out.second);
    return out;
  }

  // gradient of sum_i seeds_i * q_i in the flattened parameter order; the
  // cache must come from a train-mode forward on this spec.
  Eigen::VectorXd backward(const MlpCache& cache,
                           const Eigen::Ref<const Eigen::VectorXd>& seeds) const;

  // exponential moving average update of the running moments from the batch
  // statistics recorded in a train-mode cache
  void update_running(const MlpCache& cache);

  Eigen::Index num_params() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& theta);
  // ones for every weight, zeros for the batch-norm shifts
  Eigen::VectorXd penalty_mask() const;
};

// He-initialized network: weights ~ N(0, 2/fan_in), biases zero, batch-norm
// scale 1 / shift 0, running moments (0,1). Deterministic given seed.
MlpSpec mlp_init_he(int hidden_width, int output_width, int n_covariates,
                    std::uint64_t seed, double elu_alpha = 1.0,
                    bool use_batchnorm = true);

std::pair<Eigen::VectorXd, MlpCache> mlp_forward(
    const Eigen::Ref<const Eigen::VectorXd>& z,
    const Eigen::Ref<const Eigen::MatrixXd>& x, MlpSpec& spec, EvalMode mode);

Eigen::VectorXd mlp_backward(const MlpCache& cache,
                             const Eigen::Ref<const Eigen::VectorXd>& dq,
                             const MlpSpec& spec);

// ---------------------------------------------------------------------------
// Either model, for code paths chosen at run time.
// ---------------------------------------------------------------------------
using QModel = std::variant<PolynomialSpec, MlpSpec>;

Eigen::VectorXd q_values(const QModel& model,
                         const Eigen::Ref<const Eigen::VectorXd>& z,
                         const Eigen::Ref<const Eigen::MatrixXd>& x,
                         EvalMode mode = EvalMode::eval);

void to_json(nlohmann::json& j, const PolynomialSpec& spec);
void from_json(const nlohmann::json& j, PolynomialSpec& spec);
void to_json(nlohmann::json& j, const MlpSpec& spec);
void from_json(const nlohmann::json& j, MlpSpec& spec);
nlohmann::json qmodel_to_json(const QModel& model);
QModel qmodel_from_json(const nlohmann::json& j);

}  // namespace cde
