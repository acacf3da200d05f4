#include "ikd/nn.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "ikd/data.hpp"
#include "ikd/error.hpp"
#include "ikd/hash.hpp"
#include "ikd/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "parameter container is little-endian");

namespace ikd {

namespace {

constexpr char kMagic[8] = {'I', 'K', 'D', 'P', 'A', 'R', 'M', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr double kStdFloor = 1e-8;

template <typename T>
void put(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
T take(std::istream& is, const char* what) {
  T value;
  is.read(reinterpret_cast<char*>(&value), sizeof(value));
  if (!is) throw FormatFault(std::string("parameter file truncated reading ") + what);
  return value;
}

void check_layer_dims(const std::vector<int>& dims, const char* name) {
  if (dims.size() < 2) {
    throw ValidationError(std::string(name) + " needs at least input and output sizes");
  }
  for (int d : dims) {
    if (d <= 0) throw ValidationError(std::string(name) + " has a non-positive size");
  }
}

// Activations of one dense stack: hidden layers rectified, last linear.
struct StackCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;  // pre-activation per layer
};

Eigen::MatrixXd run_stack(const std::vector<DenseLayer>& layers,
                          const Eigen::MatrixXd& input, StackCache* cache) {
  if (cache) {
    cache->input = input;
    cache->pre.resize(layers.size());
  }
  Eigen::MatrixXd a = input;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Eigen::MatrixXd pre =
        (a * layers[k].weight.transpose()).rowwise() + layers[k].bias.transpose();
    if (cache) cache->pre[k] = pre;
    const bool last = k + 1 == layers.size();
    a = last ? std::move(pre) : pre.cwiseMax(0.0).eval();
  }
  return a;
}

// Backpropagates delta (w.r.t. the stack output) through the stack,
// filling grads; returns delta w.r.t. the stack input.
Eigen::MatrixXd backprop_stack(const std::vector<DenseLayer>& layers,
                               const StackCache& cache, Eigen::MatrixXd delta,
                               std::vector<DenseLayer>& grads, const char* stack_name) {
  grads.resize(layers.size());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const Eigen::MatrixXd act_in =
        k == 0 ? cache.input : cache.pre[k - 1].cwiseMax(0.0).eval();
    grads[k].weight = delta.transpose() * act_in;
    grads[k].bias = delta.colwise().sum().transpose();
    if (!grads[k].weight.allFinite() || !grads[k].bias.allFinite()) {
      throw TrainingFault(std::string("non-finite gradient in ") + stack_name + " layer " +
                          std::to_string(k));
    }
    delta = delta * layers[k].weight;
    if (k > 0) {
      delta.array() *= (cache.pre[k - 1].array() > 0.0).cast<double>();
    }
  }
  return delta;
}

struct ForwardCache {
  StackCache encoder, head;
  Eigen::MatrixXd y_norm;
};

void check_batch_shapes(const ParameterSet& params, const Eigen::MatrixXd& proxy,
                        const Eigen::MatrixXd& window) {
  if (proxy.cols() != 2) throw ValidationError("proxy batch must have 2 columns");
  if (params.spec.use_encoder) {
    if (window.cols() != params.spec.window_dim() || window.rows() != proxy.rows()) {
      throw ValidationError("window batch shape does not match the network spec");
    }
  }
  const auto dim = static_cast<Eigen::Index>(params.spec.input_dim());
  if (params.norm.input_mean.size() != dim || params.norm.input_std.size() != dim) {
    throw ValidationError("normalization size does not match the network spec");
  }
}

Eigen::MatrixXd forward_impl(const ParameterSet& params, const Eigen::MatrixXd& proxy,
                             const Eigen::MatrixXd& window, ForwardCache* cache) {
  check_batch_shapes(params, proxy, window);
  const NetworkSpec& spec = params.spec;
  const Normalization& norm = params.norm;

  Eigen::MatrixXd proxy_n =
      (proxy.rowwise() - norm.input_mean.head(2).transpose()).array().rowwise() /
      norm.input_std.head(2).transpose().array();

  Eigen::MatrixXd head_in;
  if (spec.use_encoder) {
    const auto wd = static_cast<Eigen::Index>(spec.window_dim());
    Eigen::MatrixXd window_n =
        (window.rowwise() - norm.input_mean.tail(wd).transpose()).array().rowwise() /
        norm.input_std.tail(wd).transpose().array();
    Eigen::MatrixXd embedding =
        run_stack(params.encoder, window_n, cache ? &cache->encoder : nullptr);
    head_in.resize(proxy.rows(), 2 + embedding.cols());
    head_in << proxy_n, embedding;
  } else {
    head_in = std::move(proxy_n);
  }

  Eigen::MatrixXd y_norm = run_stack(params.head, head_in, cache ? &cache->head : nullptr);
  if (cache) cache->y_norm = y_norm;

  Eigen::MatrixXd y = y_norm;
  for (int j = 0; j < 2; ++j) {
    y.col(j) = y_norm.col(j) * norm.output_std(j) + Eigen::VectorXd::Constant(
                                                        y.rows(), norm.output_mean(j));
  }
  return y;
}

Eigen::MatrixXd quadratic_grad(const Eigen::MatrixXd& y, const Batch& batch,
                               const LossWeights& weights) {
  const Eigen::MatrixXd error = y - batch.label;
  const Eigen::Matrix2d sym = weights.H + weights.H.transpose();
  return (error * sym) / static_cast<double>(batch.proxy.rows());
}

struct AdamState {
  std::vector<DenseLayer> m, v;

  static AdamState like(const std::vector<DenseLayer>& layers) {
    AdamState s;
    s.m.resize(layers.size());
    s.v.resize(layers.size());
    for (std::size_t k = 0; k < layers.size(); ++k) {
      s.m[k].weight = Eigen::MatrixXd::Zero(layers[k].weight.rows(), layers[k].weight.cols());
      s.m[k].bias = Eigen::VectorXd::Zero(layers[k].bias.size());
      s.v[k] = s.m[k];
    }
    return s;
  }
};

void adam_update(std::vector<DenseLayer>& layers, const std::vector<DenseLayer>& grads,
                 AdamState& state, const TrainConfig& cfg, long step) {
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = (cfg.adam_beta2 * v.array() + (1.0 - cfg.adam_beta2) * g.array().square()).matrix();
    p.array() -=
        cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.adam_eps);
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weight, grads[k].weight, state.m[k].weight, state.v[k].weight);
    update(layers[k].bias, grads[k].bias, state.m[k].bias, state.v[k].bias);
  }
}

Batch dataset_batch(const Dataset& dataset, const NetworkSpec& spec) {
  const auto n = static_cast<Eigen::Index>(dataset.size());
  Batch b;
  b.proxy.resize(n, 2);
  b.window.resize(n, spec.use_encoder ? spec.window_dim() : 0);
  b.label.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TrainingSample& s = dataset.samples[static_cast<std::size_t>(i)];
    b.proxy(i, 0) = s.v_r;
    b.proxy(i, 1) = s.c_r;
    b.label(i, 0) = s.v_cmd;
    b.label(i, 1) = s.c_cmd;
    for (Eigen::Index j = 0; j < b.window.cols(); ++j) {
      b.window(i, j) = s.window[static_cast<std::size_t>(j)];
    }
  }
  return b;
}

Batch gather_rows(const Batch& all, const std::vector<std::size_t>& idx, std::size_t begin,
                  std::size_t end) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(end - begin);
  b.proxy.resize(n, all.proxy.cols());
  b.window.resize(n, all.window.cols());
  b.label.resize(n, all.label.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(idx[begin + static_cast<std::size_t>(i)]);
    b.proxy.row(i) = all.proxy.row(r);
    b.window.row(i) = all.window.row(r);
    b.label.row(i) = all.label.row(r);
  }
  return b;
}

Normalization fit_normalization(const Batch& train, const NetworkSpec& spec) {
  Normalization norm;
  const auto d = static_cast<Eigen::Index>(spec.input_dim());
  norm.input_mean.resize(d);
  norm.input_std.resize(d);

  auto column_stats = [&](const Eigen::MatrixXd& m, Eigen::Index col_offset) {
    const double n = static_cast<double>(m.rows());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double mean = m.col(j).mean();
      const double var = (m.col(j).array() - mean).square().sum() / n;
      norm.input_mean(col_offset + j) = mean;
      norm.input_std(col_offset + j) = std::max(std::sqrt(var), kStdFloor);
    }
  };
  column_stats(train.proxy, 0);
  if (spec.use_encoder) column_stats(train.window, 2);

  const double n = static_cast<double>(train.label.rows());
  for (int j = 0; j < 2; ++j) {
    const double mean = train.label.col(j).mean();
    const double var = (train.label.col(j).array() - mean).square().sum() / n;
    norm.output_mean(j) = mean;
    norm.output_std(j) = std::max(std::sqrt(var), kStdFloor);
  }
  return norm;
}

std::uint64_t train_config_hash(const TrainConfig& cfg, const LossWeights& weights,
                                const NetworkSpec& spec) {
  std::uint64_t h = spec.hash();
  h = hash_combine(h, cfg.learning_rate);
  h = hash_combine(h, cfg.batch_size);
  h = hash_combine(h, cfg.epochs);
  h = hash_combine(h, cfg.adam_beta1);
  h = hash_combine(h, cfg.adam_beta2);
  h = hash_combine(h, cfg.adam_eps);
  h = hash_combine(h, cfg.validation_fraction);
  h = hash_combine(h, cfg.rng_seed);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) h = hash_combine(h, weights.H(r, c));
  }
  return h;
}

void write_layers(std::ostream& os, const std::vector<DenseLayer>& layers) {
  put(os, static_cast<std::uint32_t>(layers.size()));
  for (const DenseLayer& layer : layers) {
    put(os, static_cast<std::uint32_t>(layer.weight.rows()));
    put(os, static_cast<std::uint32_t>(layer.weight.cols()));
    os.write(reinterpret_cast<const char*>(layer.weight.data()),
             static_cast<std::streamsize>(sizeof(double) * layer.weight.size()));
    os.write(reinterpret_cast<const char*>(layer.bias.data()),
             static_cast<std::streamsize>(sizeof(double) * layer.bias.size()));
  }
}

std::vector<DenseLayer> read_layers(std::istream& is) {
  const auto count = take<std::uint32_t>(is, "layer count");
  if (count > 64) throw FormatFault("implausible layer count");
  std::vector<DenseLayer> layers(count);
  for (DenseLayer& layer : layers) {
    const auto rows = take<std::uint32_t>(is, "layer rows");
    const auto cols = take<std::uint32_t>(is, "layer cols");
    if (rows == 0 || cols == 0 || rows > 65536 || cols > 65536) {
      throw FormatFault("implausible layer shape");
    }
    layer.weight.resize(rows, cols);
    is.read(reinterpret_cast<char*>(layer.weight.data()),
            static_cast<std::streamsize>(sizeof(double) * layer.weight.size()));
    layer.bias.resize(rows);
    is.read(reinterpret_cast<char*>(layer.bias.data()),
            static_cast<std::streamsize>(sizeof(double) * layer.bias.size()));
    if (!is) throw FormatFault("parameter file truncated reading layer data");
  }
  return layers;
}

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  put(os, static_cast<std::uint32_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(sizeof(double) * v.size()));
}

Eigen::VectorXd read_vector(std::istream& is, const char* what) {
  const auto size = take<std::uint32_t>(is, what);
  if (size > 1'000'000) throw FormatFault("implausible vector size");
  Eigen::VectorXd v(size);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
  if (!is) throw FormatFault(std::string("parameter file truncated reading ") + what);
  return v;
}

}  // namespace

void NetworkSpec::validate() const {
  check_layer_dims(head_layers, "head_layers");
  if (head_layers.back() != 2) throw ValidationError("head must output 2 values");
  if (use_encoder) {
    check_layer_dims(encoder_layers, "encoder_layers");
    if (encoder_layers.front() != kWindowDim) {
      throw ValidationError("encoder input must be the 600-value IMU window");
    }
    if (head_layers.front() != encoder_layers.back() + 2) {
      throw ValidationError("head input must be proxy (2) plus the encoder embedding");
    }
  } else if (head_layers.front() != 2) {
    throw ValidationError("ablated head input must be the 2-value proxy");
  }
  if (activation != Activation::kRelu) throw ValidationError("unknown activation");
}

std::uint64_t NetworkSpec::hash() const {
  std::uint64_t h = kFnvOffset;
  h = hash_combine(h, static_cast<std::uint8_t>(use_encoder));
  h = hash_combine(h, static_cast<std::uint8_t>(activation));
  if (use_encoder) {
    for (int d : encoder_layers) h = hash_combine(h, static_cast<std::uint32_t>(d));
  }
  for (int d : head_layers) h = hash_combine(h, static_cast<std::uint32_t>(d));
  return h;
}

bool ParameterSet::all_finite() const {
  for (const auto* stack : {&encoder, &head}) {
    for (const DenseLayer& layer : *stack) {
      if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    }
  }
  return norm.input_mean.allFinite() && norm.input_std.allFinite() &&
         norm.output_mean.allFinite() && norm.output_std.allFinite();
}

void LossWeights::validate() const {
  if (H(0, 1) != H(1, 0)) throw ValidationError("loss weight matrix must be symmetric");
  if (!(H(0, 0) > 0.0) || !(H.determinant() > 0.0)) {
    throw ValidationError("loss weight matrix must be positive definite");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("adam_eps must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5)) {
    throw ValidationError("validation_fraction must lie in (0, 0.5)");
  }
}

ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);

  auto init_stack = [&](const std::vector<int>& dims) {
    std::vector<DenseLayer> layers(dims.size() - 1);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      const auto rows = static_cast<Eigen::Index>(dims[k + 1]);
      const auto cols = static_cast<Eigen::Index>(dims[k]);
      const double limit = std::sqrt(6.0 / static_cast<double>(dims[k]));
      layers[k].weight.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          layers[k].weight(r, c) = uniform_range(rng, -limit, limit);
        }
      }
      layers[k].bias = Eigen::VectorXd::Zero(rows);
    }
    return layers;
  };

  ParameterSet params;
  params.spec = spec;
  if (spec.use_encoder) params.encoder = init_stack(spec.encoder_layers);
  params.head = init_stack(spec.head_layers);
  params.norm.input_mean = Eigen::VectorXd::Zero(spec.input_dim());
  params.norm.input_std = Eigen::VectorXd::Ones(spec.input_dim());
  params.train_seed = seed;
  return params;
}

ModelOutput forward(const ParameterSet& params, double v_r, double c_r,
                    std::span<const double> window) {
  Eigen::MatrixXd proxy(1, 2);
  proxy << v_r, c_r;
  Eigen::MatrixXd w(1, params.spec.use_encoder ? params.spec.window_dim() : 0);
  if (params.spec.use_encoder) {
    if (window.size() != static_cast<std::size_t>(params.spec.window_dim())) {
      throw ValidationError("forward needs the full IMU window for the encoder spec");
    }
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(0, j) = window[static_cast<std::size_t>(j)];
  }
  const Eigen::MatrixXd y = forward_impl(params, proxy, w, nullptr);
  return {y(0, 0), y(0, 1)};
}

Eigen::MatrixXd forward_batch(const ParameterSet& params, const Eigen::MatrixXd& proxy,
                              const Eigen::MatrixXd& window) {
  return forward_impl(params, proxy, window, nullptr);
}

double loss(const ParameterSet& params, const Batch& batch, const LossWeights& weights) {
  if (batch.proxy.rows() == 0) throw ValidationError("loss needs a non-empty batch");
  if (batch.label.rows() != batch.proxy.rows() || batch.label.cols() != 2) {
    throw ValidationError("label batch shape mismatch");
  }
  const Eigen::MatrixXd y = forward_impl(params, batch.proxy, batch.window, nullptr);
  const Eigen::MatrixXd error = y - batch.label;
  return (error * weights.H).cwiseProduct(error).sum() /
         static_cast<double>(batch.proxy.rows());
}

GradientSet backward(const ParameterSet& params, const Batch& batch,
                     const LossWeights& weights) {
  if (batch.proxy.rows() == 0) throw ValidationError("backward needs a non-empty batch");
  ForwardCache cache;
  const Eigen::MatrixXd y = forward_impl(params, batch.proxy, batch.window, &cache);

  Eigen::MatrixXd delta = quadratic_grad(y, batch, weights);
  for (int j = 0; j < 2; ++j) delta.col(j) *= params.norm.output_std(j);

  GradientSet grads;
  const Eigen::MatrixXd head_in_delta =
      backprop_stack(params.head, cache.head, std::move(delta), grads.head, "head");
  if (params.spec.use_encoder) {
    const Eigen::MatrixXd embed_delta =
        head_in_delta.rightCols(head_in_delta.cols() - 2);
    backprop_stack(params.encoder, cache.encoder, embed_delta, grads.encoder, "encoder");
  }
  return grads;
}

TrainResult train(const Dataset& dataset, const NetworkSpec& spec,
                  const LossWeights& weights, const TrainConfig& cfg) {
  spec.validate();
  weights.validate();
  cfg.validate();
  if (dataset.size() < 1000) {
    throw ValidationError("training needs at least 1000 samples");
  }
  const auto t0 = std::chrono::steady_clock::now();

  const auto [train_set, val_set] = split(dataset, cfg.validation_fraction, cfg.rng_seed);
  if (train_set.samples.empty() || val_set.samples.empty()) {
    throw ValidationError("split produced an empty train or validation set");
  }
  const Batch train_all = dataset_batch(train_set, spec);
  const Batch val_all = dataset_batch(val_set, spec);

  ParameterSet params = init_params(spec, cfg.rng_seed);
  params.norm = fit_normalization(train_all, spec);
  params.config_hash = train_config_hash(cfg, weights, spec);

  TrainResult result;
  auto record = [&](int epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss(params, train_all, weights);
    stats.val_loss = loss(params, val_all, weights);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
      throw TrainingFault("training diverged at epoch " + std::to_string(epoch) +
                          "; reduce learning_rate");
    }
    result.curve.push_back(stats);
    return stats.val_loss;
  };

  double best_val = record(0);
  result.best_epoch = 0;
  result.params = params;

  AdamState adam_enc = AdamState::like(params.encoder);
  AdamState adam_head = AdamState::like(params.head);
  std::mt19937_64 shuffle_rng(cfg.rng_seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(train_set.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_in_place(order, shuffle_rng);
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const Batch batch = gather_rows(train_all, order, begin, end);
      GradientSet grads;
      try {
        grads = backward(params, batch, weights);
      } catch (const TrainingFault& fault) {
        throw TrainingFault(std::string(fault.what()) +
                            "; training diverged, reduce learning_rate");
      }
      ++step;
      adam_update(params.head, grads.head, adam_head, cfg, step);
      if (spec.use_encoder) adam_update(params.encoder, grads.encoder, adam_enc, cfg, step);
    }
    const double val = record(epoch);
    if (val < best_val) {
      best_val = val;
      result.best_epoch = epoch;
      result.params = params;
    }
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

double grad_check(const NetworkSpec& spec, std::uint64_t seed, int num_draws) {
  spec.validate();
  if (num_draws < 1) throw ValidationError("grad_check needs at least one draw");
  std::mt19937_64 rng(seed);

  ParameterSet params = init_params(spec, rng());
  constexpr Eigen::Index kBatch = 8;
  Batch batch;
  batch.proxy.resize(kBatch, 2);
  batch.window.resize(kBatch, spec.use_encoder ? spec.window_dim() : 0);
  batch.label.resize(kBatch, 2);
  for (Eigen::Index i = 0; i < kBatch; ++i) {
    batch.proxy(i, 0) = uniform_range(rng, kMinLabelSpeed, kMaxVelocity);
    batch.proxy(i, 1) = uniform_range(rng, -kMaxCurvature, kMaxCurvature);
    for (Eigen::Index j = 0; j < batch.window.cols(); ++j) {
      batch.window(i, j) = uniform_range(rng, -1.0, 1.0);
    }
    batch.label(i, 0) = uniform_range(rng, kMinVelocity, kMaxVelocity);
    batch.label(i, 1) = uniform_range(rng, -kMaxCurvature, kMaxCurvature);
  }
  const LossWeights weights;
  const GradientSet analytic = backward(params, batch, weights);

  struct Coordinate {
    Eigen::MatrixXd* param;
    const Eigen::MatrixXd* grad;
    Eigen::VectorXd* param_bias;
    const Eigen::VectorXd* grad_bias;
    Eigen::Index count;
  };
  std::vector<Coordinate> coords;
  auto add_stack = [&](std::vector<DenseLayer>& layers, const std::vector<DenseLayer>& grads) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      coords.push_back({&layers[k].weight, &grads[k].weight, nullptr, nullptr,
                        layers[k].weight.size()});
      coords.push_back({nullptr, nullptr, &layers[k].bias, &grads[k].bias,
                        layers[k].bias.size()});
    }
  };
  add_stack(params.head, analytic.head);
  if (spec.use_encoder) add_stack(params.encoder, analytic.encoder);

  Eigen::Index total = 0;
  for (const Coordinate& c : coords) total += c.count;

  constexpr double kStep = 1e-6;
  double max_error = 0.0;
  for (int d = 0; d < num_draws; ++d) {
    auto pick = static_cast<Eigen::Index>(pick_index(rng, static_cast<std::size_t>(total)));
    double* value = nullptr;
    double analytic_g = 0.0;
    for (const Coordinate& c : coords) {
      if (pick < c.count) {
        if (c.param) {
          value = c.param->data() + pick;
          analytic_g = *(c.grad->data() + pick);
        } else {
          value = c.param_bias->data() + pick;
          analytic_g = *(c.grad_bias->data() + pick);
        }
        break;
      }
      pick -= c.count;
    }

    const double saved = *value;
    *value = saved + kStep;
    const double up = loss(params, batch, weights);
    *value = saved - kStep;
    const double down = loss(params, batch, weights);
    *value = saved;

    const double fd = (up - down) / (2.0 * kStep);
    const double err =
        std::abs(analytic_g - fd) / std::max(std::abs(analytic_g) + std::abs(fd), 1e-4);
    max_error = std::max(max_error, err);
  }
  return max_error;
}

void save_params(const ParameterSet& params, const std::string& path) {
  params.spec.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatFault("cannot open parameter file for writing: " + path);

  os.write(kMagic, sizeof(kMagic));
  put(os, kVersion);
  put(os, params.spec.hash());
  put(os, params.train_seed);
  put(os, params.config_hash);
  put(os, static_cast<std::uint8_t>(params.spec.use_encoder));
  put(os, static_cast<std::uint8_t>(params.spec.activation));

  auto write_dims = [&](const std::vector<int>& dims) {
    put(os, static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) put(os, static_cast<std::uint32_t>(d));
  };
  write_dims(params.spec.encoder_layers);
  write_dims(params.spec.head_layers);

  write_vector(os, params.norm.input_mean);
  write_vector(os, params.norm.input_std);
  write_vector(os, params.norm.output_mean);
  write_vector(os, params.norm.output_std);
  write_layers(os, params.encoder);
  write_layers(os, params.head);
  if (!os) throw FormatFault("failed writing parameter file: " + path);
}

ParameterSet load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatFault("cannot open parameter file: " + path);

  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatFault("bad parameter magic bytes: " + path);
  }
  const auto version = take<std::uint32_t>(is, "version");
  if (version != kVersion) {
    throw FormatFault("unsupported parameter version " + std::to_string(version));
  }
  const auto stored_hash = take<std::uint64_t>(is, "spec hash");

  ParameterSet params;
  params.train_seed = take<std::uint64_t>(is, "train seed");
  params.config_hash = take<std::uint64_t>(is, "config hash");
  params.spec.use_encoder = take<std::uint8_t>(is, "use_encoder") != 0;
  params.spec.activation = static_cast<Activation>(take<std::uint8_t>(is, "activation"));

  auto read_dims = [&](const char* what) {
    const auto count = take<std::uint32_t>(is, what);
    if (count > 64) throw FormatFault("implausible layer-size list");
    std::vector<int> dims(count);
    for (auto& d : dims) d = static_cast<int>(take<std::uint32_t>(is, what));
    return dims;
  };
  params.spec.encoder_layers = read_dims("encoder sizes");
  params.spec.head_layers = read_dims("head sizes");
  params.spec.validate();
  if (params.spec.hash() != stored_hash) {
    throw FormatFault("parameter spec hash mismatch: " + path);
  }

  params.norm.input_mean = read_vector(is, "input mean");
  params.norm.input_std = read_vector(is, "input std");
  const Eigen::VectorXd out_mean = read_vector(is, "output mean");
  const Eigen::VectorXd out_std = read_vector(is, "output std");
  if (out_mean.size() != 2 || out_std.size() != 2) {
    throw FormatFault("output normalization must have 2 values");
  }
  params.norm.output_mean = out_mean;
  params.norm.output_std = out_std;
  params.encoder = read_layers(is);
  params.head = read_layers(is);

  auto expect_shapes = [&](const std::vector<DenseLayer>& layers,
                           const std::vector<int>& dims, bool used) {
    const std::size_t expected = used ? dims.size() - 1 : 0;
    if (layers.size() != expected) throw FormatFault("layer count does not match spec");
    if (!used) return;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      if (layers[k].weight.rows() != dims[k + 1] || layers[k].weight.cols() != dims[k] ||
          layers[k].bias.size() != dims[k + 1]) {
        throw FormatFault("layer shape does not match spec");
      }
    }
  };
  expect_shapes(params.encoder, params.spec.encoder_layers, params.spec.use_encoder);
  expect_shapes(params.head, params.spec.head_layers, true);
  if (params.norm.input_mean.size() != params.spec.input_dim() ||
      params.norm.input_std.size() != params.spec.input_dim()) {
    throw FormatFault("normalization size does not match spec");
  }
  if (!params.all_finite()) throw FormatFault("non-finite parameter values: " + path);
  return params;
}

void write_loss_csv(const TrainResult& result, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatFault("cannot open loss CSV for writing: " + path);
  os << "epoch,train_loss,val_loss\n";
  char line[128];
  for (const EpochStats& s : result.curve) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g\n", s.epoch, s.train_loss, s.val_loss);
    os << line;
  }
  if (!os) throw FormatFault("failed writing loss CSV: " + path);
}

}  // namespace ikd
