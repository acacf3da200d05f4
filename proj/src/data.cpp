#include "ikd/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "ikd/error.hpp"
#include "ikd/hash.hpp"
#include "ikd/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset container is little-endian");

namespace ikd {

namespace {

constexpr char kMagic[8] = {'I', 'K', 'D', 'D', 'S', 'E', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kMaxSamples = 100'000'000;

template <typename T>
void put(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
T take(std::istream& is, const char* what) {
  T value;
  is.read(reinterpret_cast<char*>(&value), sizeof(value));
  if (!is) throw FormatFault(std::string("dataset file truncated reading ") + what);
  return value;
}

struct LabelStats {
  double mean[4]{}, stddev[4]{};
};

LabelStats label_stats(const Dataset& dataset) {
  LabelStats stats;
  const double n = static_cast<double>(dataset.size());
  if (n == 0.0) return stats;
  for (const TrainingSample& s : dataset.samples) {
    const double v[4] = {s.v_r, s.c_r, s.v_cmd, s.c_cmd};
    for (int k = 0; k < 4; ++k) stats.mean[k] += v[k];
  }
  for (int k = 0; k < 4; ++k) stats.mean[k] /= n;
  for (const TrainingSample& s : dataset.samples) {
    const double v[4] = {s.v_r, s.c_r, s.v_cmd, s.c_cmd};
    for (int k = 0; k < 4; ++k) {
      const double d = v[k] - stats.mean[k];
      stats.stddev[k] += d * d;
    }
  }
  for (int k = 0; k < 4; ++k) stats.stddev[k] = std::sqrt(stats.stddev[k] / n);
  return stats;
}

CoverageHistogram build_histogram(const Dataset& dataset, double lo, double hi, int bins,
                                  float TrainingSample::* field) {
  if (bins < 1) throw ValidationError("histogram needs at least one bin");
  CoverageHistogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (const TrainingSample& s : dataset.samples) {
    const double u = (s.*field - lo) / (hi - lo);
    const int bin = std::clamp(static_cast<int>(u * bins), 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

}  // namespace

void ExplorationPolicy::validate() const {
  if (dwell <= 0.0) throw ValidationError("policy dwell must be positive");
  if (v_min > v_max || v_min < kMinVelocity || v_max > kMaxVelocity) {
    throw ValidationError("policy speed range must lie within [0, 3] m/s");
  }
  if (c_min > c_max || c_min < -kMaxCurvature || c_max > kMaxCurvature) {
    throw ValidationError("policy curvature range must lie within [-1.35, 1.35] 1/m");
  }
  if (v_step < 0.0 || c_step < 0.0) throw ValidationError("policy step sizes must be >= 0");
  if (jump_probability < 0.0 || jump_probability > 1.0) {
    throw ValidationError("policy jump probability must be in [0, 1]");
  }
}

double CoverageHistogram::occupancy() const {
  if (counts.empty()) return 0.0;
  std::size_t hit = 0;
  for (int c : counts) {
    if (c > 0) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(counts.size());
}

CoverageHistogram command_speed_histogram(const Dataset& dataset, int bins) {
  return build_histogram(dataset, kMinVelocity, kMaxVelocity, bins, &TrainingSample::v_cmd);
}

CoverageHistogram command_curvature_histogram(const Dataset& dataset, int bins) {
  return build_histogram(dataset, -kMaxCurvature, kMaxCurvature, bins,
                         &TrainingSample::c_cmd);
}

std::optional<TrainingSample> align(const ControlInput& command, double odometry_speed,
                                    double mean_gyro_z, std::span<const double> window,
                                    double time) {
  if (window.size() != static_cast<std::size_t>(kWindowDim)) {
    throw ValidationError("IMU window must hold exactly 600 values");
  }
  if (odometry_speed < kMinLabelSpeed) return std::nullopt;

  TrainingSample s;
  s.v_r = static_cast<float>(odometry_speed);
  s.c_r = static_cast<float>(mean_gyro_z / odometry_speed);
  s.v_cmd = static_cast<float>(command.velocity);
  s.c_cmd = static_cast<float>(command.curvature);
  for (int i = 0; i < kWindowDim; ++i) {
    s.window[static_cast<std::size_t>(i)] = static_cast<float>(window[static_cast<std::size_t>(i)]);
  }
  s.time = time;

  bool finite = std::isfinite(s.v_r) && std::isfinite(s.c_r) && std::isfinite(s.v_cmd) &&
                std::isfinite(s.c_cmd) && std::isfinite(time);
  for (float w : s.window) finite = finite && std::isfinite(w);
  if (!finite) throw ValidationError("non-finite training sample");
  return s;
}

Dataset collect(const TerrainField& field, const SimConfig& sim_cfg,
                const ExplorationPolicy& policy, double duration_seconds) {
  sim_cfg.validate();
  policy.validate();

  const int samples_per_tick = sim_cfg.control_substeps() / sim_cfg.imu_substeps();
  const int warmup_ticks = (kWindowLen + samples_per_tick - 1) / samples_per_tick;
  const int ticks = static_cast<int>(std::floor(duration_seconds / sim_cfg.control_dt + 1e-9));
  if (ticks <= warmup_ticks) {
    throw ValidationError("collection duration too short for one full IMU window");
  }
  const int dwell_ticks =
      std::max(1, static_cast<int>(std::llround(policy.dwell / sim_cfg.control_dt)));

  Simulator sim(field, sim_cfg);
  VehicleState start;
  start.position_x = policy.arena_center.x;
  start.position_y = policy.arena_center.y;
  sim.reset_state(start);

  std::mt19937_64 rng(policy.rng_seed);
  double v = 0.5 * (policy.v_min + policy.v_max);
  double c = 0.5 * (policy.c_min + policy.c_max);

  Dataset dataset;
  dataset.provenance.world_hash = terrain_hash(field);
  dataset.provenance.policy_seed = policy.rng_seed;
  dataset.provenance.sim_seed = sim_cfg.rng_seed;
  dataset.provenance.duration_seconds = duration_seconds;
  dataset.provenance.control_dt = sim_cfg.control_dt;
  dataset.provenance.imu_dt = sim_cfg.imu_dt;
  dataset.samples.reserve(static_cast<std::size_t>(ticks - warmup_ticks));

  for (int k = 0; k < ticks; ++k) {
    if (k % dwell_ticks == 0) {
      // Three draws per change regardless of branch, so trajectories stay
      // aligned across policies that differ only in jump_probability.
      const double jump = uniform01(rng);
      const double a = uniform01(rng);
      const double b = uniform01(rng);
      if (jump < policy.jump_probability) {
        v = policy.v_min + (policy.v_max - policy.v_min) * a;
        c = policy.c_min + (policy.c_max - policy.c_min) * b;
      } else {
        v = std::clamp(v + policy.v_step * (2.0 * a - 1.0), policy.v_min, policy.v_max);
        c = std::clamp(c + policy.c_step * (2.0 * b - 1.0), policy.c_min, policy.c_max);
      }
    }

    ControlInput u(v, c);
    if (policy.arena_radius > 0.0) {
      const Vec2 offset = policy.arena_center - sim.state().position();
      if (offset.norm() > policy.arena_radius) {
        const double bearing =
            wrap_angle(std::atan2(offset.y, offset.x) - sim.state().heading);
        u.curvature = std::clamp(1.5 * bearing, policy.c_min, policy.c_max);
      }
    }

    const double command_time = k * sim_cfg.control_dt;
    std::vector<double> window;
    if (k >= warmup_ticks) window = sim.imu_window();
    sim.tick_control(u);
    if (k >= warmup_ticks) {
      auto sample = align(u, sim.last_tick_odometry_speed(), sim.last_tick_mean_gyro_z(),
                          window, command_time);
      if (sample) dataset.samples.push_back(*sample);
    }
  }
  return dataset;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction,
                                  std::uint64_t seed) {
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw ValidationError("validation fraction must be in [0, 1)");
  }
  const std::size_t n = dataset.size();
  const auto val_count =
      static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));

  Dataset train, val;
  train.provenance = dataset.provenance;
  val.provenance = dataset.provenance;
  if (val_count == 0) {
    train.samples = dataset.samples;
    return {train, val};
  }

  std::mt19937_64 rng(seed);
  const std::size_t start = pick_index(rng, n - val_count + 1);
  const std::size_t stop = start + val_count;

  double val_lo = dataset.samples[start].time;
  double val_hi = val_lo;
  for (std::size_t i = start; i < stop; ++i) {
    val_lo = std::min(val_lo, dataset.samples[i].time);
    val_hi = std::max(val_hi, dataset.samples[i].time);
  }
  // Windows cover [t - w, t); overlap needs |t_i - t_j| < w.
  const double window_duration = kWindowLen * dataset.provenance.imu_dt;

  for (std::size_t i = 0; i < n; ++i) {
    const TrainingSample& s = dataset.samples[i];
    if (i >= start && i < stop) {
      val.samples.push_back(s);
    } else if (s.time <= val_lo - window_duration || s.time >= val_hi + window_duration) {
      train.samples.push_back(s);
    }
  }
  return {train, val};
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatFault("cannot open dataset file for writing: " + path);

  os.write(kMagic, sizeof(kMagic));
  put(os, kVersion);
  put(os, static_cast<std::uint64_t>(dataset.size()));
  for (const TrainingSample& s : dataset.samples) {
    put(os, s.v_r);
    put(os, s.c_r);
    put(os, s.v_cmd);
    put(os, s.c_cmd);
    os.write(reinterpret_cast<const char*>(s.window.data()),
             sizeof(float) * s.window.size());
  }
  for (const TrainingSample& s : dataset.samples) put(os, s.time);

  const Provenance& p = dataset.provenance;
  put(os, p.world_hash);
  put(os, p.policy_seed);
  put(os, p.sim_seed);
  put(os, p.duration_seconds);
  put(os, p.control_dt);
  put(os, p.imu_dt);

  const LabelStats stats = label_stats(dataset);
  for (int k = 0; k < 4; ++k) put(os, stats.mean[k]);
  for (int k = 0; k < 4; ++k) put(os, stats.stddev[k]);

  if (!os) throw FormatFault("failed writing dataset file: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatFault("cannot open dataset file: " + path);

  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatFault("bad dataset magic bytes: " + path);
  }
  const auto version = take<std::uint32_t>(is, "version");
  if (version != kVersion) {
    throw FormatFault("unsupported dataset version " + std::to_string(version));
  }
  const auto n = take<std::uint64_t>(is, "sample count");
  if (n > kMaxSamples) throw FormatFault("implausible dataset sample count");

  Dataset dataset;
  dataset.samples.resize(static_cast<std::size_t>(n));
  for (TrainingSample& s : dataset.samples) {
    s.v_r = take<float>(is, "v_r");
    s.c_r = take<float>(is, "c_r");
    s.v_cmd = take<float>(is, "v_cmd");
    s.c_cmd = take<float>(is, "c_cmd");
    is.read(reinterpret_cast<char*>(s.window.data()), sizeof(float) * s.window.size());
    if (!is) throw FormatFault("dataset file truncated reading window");
  }
  for (TrainingSample& s : dataset.samples) s.time = take<double>(is, "time");

  Provenance& p = dataset.provenance;
  p.world_hash = take<std::uint64_t>(is, "world hash");
  p.policy_seed = take<std::uint64_t>(is, "policy seed");
  p.sim_seed = take<std::uint64_t>(is, "sim seed");
  p.duration_seconds = take<double>(is, "duration");
  p.control_dt = take<double>(is, "control_dt");
  p.imu_dt = take<double>(is, "imu_dt");
  for (int k = 0; k < 8; ++k) take<double>(is, "label stats");
  return dataset;
}

void export_dataset_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatFault("cannot open CSV file for writing: " + path);
  os << "time,v_r,c_r,v_cmd,c_cmd\n";
  char line[160];
  for (const TrainingSample& s : dataset.samples) {
    std::snprintf(line, sizeof(line), "%.17g,%.9g,%.9g,%.9g,%.9g\n", s.time, s.v_r, s.c_r,
                  s.v_cmd, s.c_cmd);
    os << line;
  }
  if (!os) throw FormatFault("failed writing CSV file: " + path);
}

}  // namespace ikd
