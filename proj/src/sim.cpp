#include "ikd/sim.hpp"

#include <algorithm>
#include <cmath>

#include "ikd/error.hpp"

namespace ikd {

namespace {

bool all_finite(const VehicleState& s) {
  return std::isfinite(s.position_x) && std::isfinite(s.position_y) &&
         std::isfinite(s.heading) && std::isfinite(s.linear_speed) &&
         std::isfinite(s.yaw_rate) && std::isfinite(s.actuator_speed) &&
         std::isfinite(s.actuator_curvature) && std::isfinite(s.time);
}

// First-order lag towards target; tau <= 0 snaps. The per-step change is
// optionally rate-limited.
double lag_towards(double current, double target, double tau, double dt,
                   double max_rate) {
  double delta = (tau <= 0.0) ? (target - current)
                              : (target - current) * (1.0 - std::exp(-dt / tau));
  if (tau > 0.0 && max_rate > 0.0) {
    delta = std::clamp(delta, -max_rate * dt, max_rate * dt);
  }
  return current + delta;
}

}  // namespace

ControlInput::ControlInput(double v, double c)
    : velocity(std::clamp(v, kMinVelocity, kMaxVelocity)),
      curvature(std::clamp(c, -kMaxCurvature, kMaxCurvature)) {}

void SimConfig::validate() const {
  auto is_multiple = [](double big, double small) {
    if (small <= 0.0 || big < small) return false;
    const double ratio = big / small;
    return std::abs(ratio - std::round(ratio)) < 1e-9;
  };
  if (!is_multiple(imu_dt, physics_dt) || !is_multiple(control_dt, imu_dt)) {
    throw ValidationError(
        "sim config requires physics_dt <= imu_dt <= control_dt, each an "
        "integer multiple of the previous");
  }
  if (max_accel <= 0.0) throw ValidationError("max_accel must be positive");
}

int SimConfig::imu_substeps() const {
  return static_cast<int>(std::round(imu_dt / physics_dt));
}

int SimConfig::control_substeps() const {
  return static_cast<int>(std::round(control_dt / physics_dt));
}

double grip_factor(const TerrainParams& terrain, double linear_speed,
                   const SimConfig& cfg) {
  const double v2 = linear_speed * linear_speed;
  return terrain.grip / (1.0 + cfg.understeer_gain * terrain.roughness * v2);
}

VehicleState step(const VehicleState& state, const ControlInput& u,
                  const TerrainField& field, const SimConfig& cfg) {
  if (!all_finite(state) || !std::isfinite(u.velocity) || !std::isfinite(u.curvature)) {
    throw SimulationFault("non-finite vehicle state or control input");
  }
  const double dt = cfg.physics_dt;
  const TerrainParams terrain = terrain_at(field, state.position());

  VehicleState next = state;
  next.actuator_speed = std::clamp(
      lag_towards(state.actuator_speed, u.velocity, cfg.speed_lag_tau, dt, cfg.max_accel),
      kMinVelocity, kMaxVelocity);
  next.actuator_curvature = std::clamp(
      lag_towards(state.actuator_curvature, u.curvature, cfg.steer_lag_tau, dt, 0.0),
      -kMaxCurvature, kMaxCurvature);

  const double gf = grip_factor(terrain, state.linear_speed, cfg);
  const double c_eff = next.actuator_curvature * gf;
  const double v_eff = std::max(0.0, next.actuator_speed * (1.0 - terrain.drag * dt));

  // Constant-curvature arc over dt, in the robot frame.
  const double dtheta = v_eff * c_eff * dt;
  double dx, dy;
  if (std::abs(c_eff) < 1e-9) {
    dx = v_eff * dt;
    dy = 0.0;
  } else {
    dx = std::sin(dtheta) / c_eff;
    dy = (1.0 - std::cos(dtheta)) / c_eff;
  }
  const Vec2 motion = Vec2{dx, dy}.rotated(state.heading);
  next.position_x += motion.x;
  next.position_y += motion.y;
  next.heading = wrap_angle(state.heading + dtheta);
  next.linear_speed = v_eff;
  next.yaw_rate = v_eff * c_eff;
  next.time += dt;
  return next;
}

ImuSample sample_imu(const VehicleState& state, const TerrainField& field,
                     const SimConfig& cfg, std::mt19937_64& rng) {
  const TerrainParams terrain = terrain_at(field, state.position());
  const double sigma = cfg.vibration_gain * terrain.roughness * state.linear_speed;
  std::normal_distribution<double> noise(0.0, 1.0);

  // Fixed draw order keeps trajectories reproducible under a fixed seed.
  const double n_ax = noise(rng), n_ay = noise(rng), n_az = noise(rng);
  const double n_gx = noise(rng), n_gy = noise(rng), n_gz = noise(rng);

  // Vibration couples mainly into vertical accel; lateral/longitudinal
  // accel and the gyro see attenuated copies.
  constexpr double kAccelCoupling = 0.3;
  constexpr double kGyroCoupling = 0.2;

  ImuSample s;
  s.accel_x = kAccelCoupling * sigma * n_ax;
  s.accel_y = state.linear_speed * state.yaw_rate + kAccelCoupling * sigma * n_ay;
  s.accel_z = kGravity + sigma * n_az;
  s.gyro_x = kGyroCoupling * sigma * n_gx;
  s.gyro_y = kGyroCoupling * sigma * n_gy;
  s.gyro_z = state.yaw_rate + kGyroCoupling * sigma * n_gz;
  s.time = state.time;
  return s;
}

Displacement rollout_ideal(const ControlInput& u, double horizon) {
  const double theta = u.velocity * u.curvature * horizon;
  if (std::abs(u.curvature) < 1e-6) {
    return {u.velocity * horizon, 0.0, 0.0};
  }
  return {std::sin(theta) / u.curvature, (1.0 - std::cos(theta)) / u.curvature, theta};
}

Simulator::Simulator(TerrainField field, SimConfig cfg)
    : field_(std::move(field)), cfg_(cfg), rng_(cfg.rng_seed) {
  cfg_.validate();
}

void Simulator::reset_state(const VehicleState& state) { state_ = state; }

const VehicleState& Simulator::tick_control(const ControlInput& u, const Observer& observer) {
  const int substeps = cfg_.control_substeps();
  const int imu_every = cfg_.imu_substeps();
  double odo_sum = 0.0;
  double gyro_sum = 0.0;
  int gyro_count = 0;
  for (int i = 0; i < substeps; ++i) {
    state_ = step(state_, u, field_, cfg_);
    odo_sum += state_.actuator_speed;
    ++physics_steps_;
    if (physics_steps_ % imu_every == 0) {
      const ImuSample s = sample_imu(state_, field_, cfg_, rng_);
      imu_log_.push_back(s);
      while (imu_log_.size() > static_cast<size_t>(kImuWindowLen)) imu_log_.pop_front();
      gyro_sum += s.gyro_z;
      ++gyro_count;
      if (observer) observer(state_);
    }
  }
  last_tick_odometry_speed_ = odo_sum / substeps;
  last_tick_mean_gyro_z_ = gyro_count > 0 ? gyro_sum / gyro_count : 0.0;
  return state_;
}

std::vector<double> Simulator::imu_window(int window_len) const {
  if (static_cast<int>(imu_log_.size()) < window_len) {
    throw SimulationFault("IMU window requested before enough samples were logged");
  }
  std::vector<double> out(static_cast<size_t>(window_len) * 6);
  const size_t start = imu_log_.size() - static_cast<size_t>(window_len);
  for (int i = 0; i < window_len; ++i) {
    const ImuSample& s = imu_log_[start + i];
    out[0 * window_len + i] = s.accel_x;
    out[1 * window_len + i] = s.accel_y;
    out[2 * window_len + i] = s.accel_z;
    out[3 * window_len + i] = s.gyro_x;
    out[4 * window_len + i] = s.gyro_y;
    out[5 * window_len + i] = s.gyro_z;
  }
  return out;
}

}  // namespace ikd
