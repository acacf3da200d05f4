#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ikd {

struct Dataset;  // data.hpp

enum class Activation : std::uint8_t { kRelu = 0 };

// Architecture of the inverse model: an IMU-window encoder producing a
// 2-d embedding, concatenated with the desired {v_r, c_r} and fed to a
// small head that emits the control command {v_c, c_c}. The ablation drops
// the encoder and the head consumes {v_r, c_r} alone.
struct NetworkSpec {
  std::vector<int> encoder_layers{600, 256, 256, 2};
  std::vector<int> head_layers{4, 32, 32, 2};
  Activation activation{Activation::kRelu};
  bool use_encoder{true};

  static NetworkSpec full() { return NetworkSpec{}; }
  static NetworkSpec ablated() {
    NetworkSpec s;
    s.use_encoder = false;
    s.head_layers = {2, 32, 32, 2};
    return s;
  }

  int window_dim() const { return use_encoder ? encoder_layers.front() : 0; }
  int proxy_dim() const { return 2; }
  int input_dim() const { return proxy_dim() + window_dim(); }
  int output_dim() const { return head_layers.back(); }

  // Consistency of layer sizes; throws ValidationError on violation.
  void validate() const;
  std::uint64_t hash() const;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Zero-mean/unit-variance statistics from the training split. Input order
// is [v_r, c_r, window...]; output order is [v_cmd, c_cmd].
struct Normalization {
  Eigen::VectorXd input_mean, input_std;
  Eigen::Vector2d output_mean{0.0, 0.0}, output_std{1.0, 1.0};
};

struct ParameterSet {
  NetworkSpec spec;
  std::vector<DenseLayer> encoder;  // empty when !spec.use_encoder
  std::vector<DenseLayer> head;
  Normalization norm;
  std::uint64_t train_seed{0};
  std::uint64_t config_hash{0};

  bool all_finite() const;
};

// Positive definite weighting of the control-error quadratic loss. The
// default weighs curvature error 4x velocity error.
struct LossWeights {
  Eigen::Matrix2d H = (Eigen::Matrix2d() << 1.0, 0.0, 0.0, 4.0).finished();
  // Symmetry plus positive leading principal minors.
  void validate() const;
};

struct TrainConfig {
  double learning_rate{1e-3};
  int batch_size{64};
  int epochs{50};
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_eps{1e-8};
  double validation_fraction{0.1};
  std::uint64_t rng_seed{0};

  void validate() const;
};

// Physical-unit training batch; window has zero columns for the ablation.
struct Batch {
  Eigen::MatrixXd proxy;   // B x 2, {v_r, c_r}
  Eigen::MatrixXd window;  // B x 600 or B x 0
  Eigen::MatrixXd label;   // B x 2, {v_cmd, c_cmd}
};

struct ModelOutput {
  double velocity{0.0};
  double curvature{0.0};
};

struct GradientSet {
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> head;
};

struct EpochStats {
  int epoch{0};
  double train_loss{0.0};  // over the full training split, post-epoch
  double val_loss{0.0};
};

struct TrainResult {
  ParameterSet params;  // snapshot with the best validation loss
  std::vector<EpochStats> curve;
  int best_epoch{0};
  double wall_seconds{0.0};
};

// Random initialization (He-style fan-in scaling), identity normalization.
ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed);

// Physical units in, physical units out; the output is deliberately not
// clamped to actuator limits (that is the controller's job). The window
// must be present exactly when the spec uses the encoder.
ModelOutput forward(const ParameterSet& params, double v_r, double c_r,
                    std::span<const double> window = {});

// Batched forward pass, one row per sample.
Eigen::MatrixXd forward_batch(const ParameterSet& params, const Eigen::MatrixXd& proxy,
                              const Eigen::MatrixXd& window);

// Mean H-quadratic error over the batch: mean_i (u_i - f(x_i))^T H (u_i - f(x_i)).
double loss(const ParameterSet& params, const Batch& batch, const LossWeights& weights);

// Reverse-mode gradient of loss() with respect to every weight and bias.
GradientSet backward(const ParameterSet& params, const Batch& batch,
                     const LossWeights& weights);

// End-to-end supervised training with Adam-style adaptive moments.
// Deterministic for a fixed config (fixed shuffle, single-threaded,
// fixed accumulation order). Throws TrainingFault on divergence.
TrainResult train(const Dataset& dataset, const NetworkSpec& spec,
                  const LossWeights& weights, const TrainConfig& cfg);

// Max central-finite-difference error over randomly drawn parameter
// coordinates of a randomly initialized network on a random batch.
// The error is |analytic - fd| / max(|analytic| + |fd|, 1e-4).
double grad_check(const NetworkSpec& spec, std::uint64_t seed, int num_draws = 120);

// Versioned little-endian binary container; round-trips bit-exactly.
void save_params(const ParameterSet& params, const std::string& path);
ParameterSet load_params(const std::string& path);

void write_loss_csv(const TrainResult& result, const std::string& path);

}  // namespace ikd
