#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <vector>

#include "ikd/geometry.hpp"
#include "ikd/terrain.hpp"

namespace ikd {

// Actuator envelope of the vehicle (scale 1/10th Ackermann car).
inline constexpr double kMinVelocity = 0.0;
inline constexpr double kMaxVelocity = 3.0;    // m/s
inline constexpr double kMaxCurvature = 1.35;  // 1/m
inline constexpr double kGravity = 9.81;       // m/s^2

struct ControlInput {
  double velocity{0.0};   // m/s, clamped to [0, 3]
  double curvature{0.0};  // 1/m, clamped to [-1.35, 1.35]

  ControlInput() = default;
  ControlInput(double v, double c);
};

struct VehicleState {
  double position_x{0.0};         // m
  double position_y{0.0};         // m
  double heading{0.0};            // rad, wrapped to (-pi, pi]
  double linear_speed{0.0};       // m/s, actual (post-slip), >= 0
  double yaw_rate{0.0};           // rad/s
  double actuator_speed{0.0};     // m/s, lagged internal actuator state
  double actuator_curvature{0.0}; // 1/m, lagged internal actuator state
  double time{0.0};               // s

  Vec2 position() const { return {position_x, position_y}; }
};

struct ImuSample {
  double accel_x{0.0}, accel_y{0.0}, accel_z{0.0};  // m/s^2
  double gyro_x{0.0}, gyro_y{0.0}, gyro_z{0.0};     // rad/s
  double time{0.0};                                 // s
};

struct SimConfig {
  double physics_dt{0.001};      // s
  double imu_dt{0.005};          // s (200 Hz)
  double control_dt{0.05};       // s (20 Hz)
  double max_accel{4.0};         // m/s^2, actuator speed rate limit
  double speed_lag_tau{0.15};    // s, first-order speed actuator lag
  double steer_lag_tau{0.08};    // s, first-order steering actuator lag
  double understeer_gain{0.6};   // dimensionless
  double vibration_gain{1.0};    // dimensionless
  std::uint64_t rng_seed{0};

  // Enforces physics_dt <= imu_dt <= control_dt, each an integer
  // multiple of the previous. Throws ValidationError otherwise.
  void validate() const;
  int imu_substeps() const;      // physics steps per IMU sample
  int control_substeps() const;  // physics steps per control period
};

// Curvature attenuation at the given terrain and speed. Equals grip at
// zero speed and decreases with speed^2 and roughness.
double grip_factor(const TerrainParams& terrain, double linear_speed,
                   const SimConfig& cfg);

// One physics step of the ground-truth forward dynamics. Deterministic.
// Throws SimulationFault on non-finite state or input.
VehicleState step(const VehicleState& state, const ControlInput& u,
                  const TerrainField& field, const SimConfig& cfg);

// Synthesizes one 6-DoF inertial reading for the current state. The
// vibration noise scale is vibration_gain * roughness * linear_speed.
ImuSample sample_imu(const VehicleState& state, const TerrainField& field,
                     const SimConfig& cfg, std::mt19937_64& rng);

// Robot-frame displacement over the horizon.
struct Displacement {
  double dx{0.0};       // m, forward
  double dy{0.0};       // m, left
  double dheading{0.0}; // rad
};

// Closed-form constant-curvature arc: the ideal no-slip, no-lag forward
// model used by the sampling baseline.
Displacement rollout_ideal(const ControlInput& u, double horizon);

// Convenience wrapper advancing one vehicle through a terrain field at the
// physics rate while logging IMU samples at the IMU rate. Single-threaded;
// independent instances may run in parallel.
class Simulator {
 public:
  Simulator(TerrainField field, SimConfig cfg);

  const VehicleState& state() const { return state_; }
  const SimConfig& config() const { return cfg_; }
  const TerrainField& field() const { return field_; }

  void reset_state(const VehicleState& state);

  // Advances one control period, holding u. The optional observer is
  // called once per IMU sample (after the sample is logged).
  using Observer = std::function<void(const VehicleState&)>;
  const VehicleState& tick_control(const ControlInput& u, const Observer& observer = {});

  // Latest IMU samples, oldest first. Only the most recent window_len
  // samples are retained.
  const std::deque<ImuSample>& imu_log() const { return imu_log_; }
  bool has_window(int window_len = kImuWindowLen) const {
    return static_cast<int>(imu_log_.size()) >= window_len;
  }

  // Flattens the most recent window_len samples channel-major:
  // [accel_x..., accel_y..., accel_z..., gyro_x..., gyro_y..., gyro_z...],
  // oldest to newest within each channel block.
  std::vector<double> imu_window(int window_len = kImuWindowLen) const;

  // Mean actuator (wheel odometry) speed and mean gyro-z over the last
  // control period; used for labeling.
  double last_tick_odometry_speed() const { return last_tick_odometry_speed_; }
  double last_tick_mean_gyro_z() const { return last_tick_mean_gyro_z_; }

  static constexpr int kImuWindowLen = 100;

 private:
  TerrainField field_;
  SimConfig cfg_;
  VehicleState state_{};
  std::mt19937_64 rng_;
  std::deque<ImuSample> imu_log_;
  long physics_steps_{0};
  double last_tick_odometry_speed_{0.0};
  double last_tick_mean_gyro_z_{0.0};
};

}  // namespace ikd
