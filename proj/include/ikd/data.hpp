#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ikd/geometry.hpp"
#include "ikd/sim.hpp"
#include "ikd/terrain.hpp"

namespace ikd {

// c_r = gyro_z / v_r is singular near standstill; slower samples are
// rejected during labeling.
inline constexpr double kMinLabelSpeed = 0.2;  // m/s
inline constexpr int kWindowLen = 100;         // IMU samples per window
inline constexpr int kWindowDim = 600;         // 100 samples x 6 channels

// Bounded random walk over the command space, holding each command for
// `dwell` seconds. Occasional uniform jumps keep coverage of the command
// ranges broad. With arena_radius > 0 the curvature steers back toward
// arena_center whenever the vehicle strays outside.
struct ExplorationPolicy {
  std::uint64_t rng_seed{0};
  double dwell{0.5};  // s
  double v_min{kMinVelocity}, v_max{kMaxVelocity};
  double c_min{-kMaxCurvature}, c_max{kMaxCurvature};
  double v_step{0.5};
  double c_step{0.6};
  double jump_probability{0.2};
  Vec2 arena_center{0.0, 0.0};
  double arena_radius{0.0};  // <= 0 disables containment

  void validate() const;
};

// One labeled point: the issued command, the realized motion expressed as
// {v_r, c_r}, and the 0.5 s IMU window preceding the command. Values are
// quantized to 32-bit floats at creation so in-memory and on-disk data are
// bit-identical.
struct TrainingSample {
  float v_r{0.0f};    // m/s, mean wheel-odometry speed over the horizon
  float c_r{0.0f};    // 1/m, mean gyro-z over the horizon / v_r
  float v_cmd{0.0f};  // m/s
  float c_cmd{0.0f};  // 1/m
  std::array<float, kWindowDim> window{};  // channel-major, oldest first
  double time{0.0};   // s, command time

  bool operator==(const TrainingSample&) const = default;
};

struct Provenance {
  std::uint64_t world_hash{0};
  std::uint64_t policy_seed{0};
  std::uint64_t sim_seed{0};
  double duration_seconds{0.0};
  double control_dt{0.0};
  double imu_dt{0.0};

  bool operator==(const Provenance&) const = default;
};

struct Dataset {
  std::vector<TrainingSample> samples;
  Provenance provenance;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Dataset&) const = default;
};

// Bin occupancy of a command marginal over its configured range.
struct CoverageHistogram {
  double lo{0.0}, hi{0.0};
  std::vector<int> counts;

  // Fraction of bins with at least one sample.
  double occupancy() const;
};

CoverageHistogram command_speed_histogram(const Dataset& dataset, int bins = 20);
CoverageHistogram command_curvature_histogram(const Dataset& dataset, int bins = 20);

// Label construction for one control step. The window is the flattened
// 0.5 s of IMU strictly preceding the command; realized motion over the
// following horizon arrives as mean odometry speed and mean gyro-z.
// Returns nothing when v_r < kMinLabelSpeed.
std::optional<TrainingSample> align(const ControlInput& command, double odometry_speed,
                                    double mean_gyro_z, std::span<const double> window,
                                    double time);

// Runs the exploration policy from rest at the arena center for the given
// duration, emitting one sample per control step once the IMU window is
// full. Throws ValidationError when the duration cannot cover one window.
Dataset collect(const TerrainField& field, const SimConfig& sim_cfg,
                const ExplorationPolicy& policy, double duration_seconds);

// Contiguous-block split by time: validation is round(fraction * N)
// consecutive samples at a seed-chosen offset, and training drops any
// sample whose IMU window overlaps a validation window. Fraction 0 keeps
// everything in train.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction,
                                  std::uint64_t seed);

// Versioned little-endian binary container; round-trips bit-exactly.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Labels only (windows stay in the binary format); header row
// `time,v_r,c_r,v_cmd,c_cmd`.
void export_dataset_csv(const Dataset& dataset, const std::string& path);

}  // namespace ikd
