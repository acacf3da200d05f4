#include "ikd/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>

#include "json.hpp"

#include "ikd/error.hpp"
#include "ikd/hash.hpp"

namespace ikd {

namespace {

using ordered_json = nlohmann::ordered_json;

void set_rate(ordered_json& j, const char* key, const std::optional<double>& value) {
  if (value) {
    j[key] = *value;
  } else {
    j[key] = nullptr;
  }
}

std::optional<double> get_rate(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string hash_to_string(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_from_string(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

}  // namespace

std::string to_string(TurnOutcome outcome) {
  switch (outcome) {
    case TurnOutcome::kPassed: return "passed";
    case TurnOutcome::kCollision: return "collision";
    case TurnOutcome::kStuck: return "stuck";
  }
  throw ValidationError("unknown turn outcome");
}

void EvalConfig::validate() const {
  sim.validate();
  controller.validate();
  if (!(footprint_radius > 0.0)) throw ValidationError("footprint radius must be positive");
  if (!(stuck_window > 0.0) || !(stuck_distance > 0.0)) {
    throw ValidationError("stuck detection thresholds must be positive");
  }
  if (!(reset_advance > 0.0)) throw ValidationError("reset advance must be positive");
  if (!(lap_timeout > 0.0)) throw ValidationError("lap timeout must be positive");
  if (gamma < 0.0) throw ValidationError("objective gamma must be non-negative");
}

void BenchmarkConfig::validate() const {
  eval.validate();
  if (modes.empty()) throw ValidationError("benchmark needs at least one mode");
  if (speeds.empty()) throw ValidationError("benchmark needs at least one speed");
  for (double v : speeds) {
    if (!(v > 0.0) || v > kMaxVelocity) {
      throw ValidationError("benchmark speeds must lie in (0, 3] m/s");
    }
  }
  if (laps_per_cell < 1) throw ValidationError("laps_per_cell must be at least 1");
  if (workers < 1) throw ValidationError("workers must be at least 1");
}

double objective_J(const std::vector<TrajectoryPoint>& trajectory, const GlobalPlan& plan,
                   double gamma) {
  if (trajectory.size() < 2) {
    throw ValidationError("objective needs at least two trajectory points");
  }
  const double duration = trajectory.back().time - trajectory.front().time;
  double integral = 0.0;
  std::optional<double> prev_s;
  for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) {
    const TrajectoryPoint& p = trajectory[i];
    VehicleState probe;
    probe.position_x = p.x;
    probe.position_y = p.y;
    const double s = project(plan, probe, prev_s);
    prev_s = s;
    const Vec2 on_plan = plan.point_at_progress(s);
    const double d2 = (Vec2{p.x, p.y} - on_plan).norm_sq();
    integral += d2 * (trajectory[i + 1].time - p.time);
  }
  return duration + gamma * integral;
}

LapResult run_lap(const Track& track, const TerrainField& field, ControllerMode mode,
                  double target_speed, std::uint64_t seed, const EvalConfig& cfg,
                  const ParameterSet* params) {
  EvalConfig local = cfg;
  local.controller.mode = mode;
  local.controller.schedule.target_speed = target_speed;
  local.controller.control_dt = local.sim.control_dt;
  local.sim.rng_seed = seed;
  local.validate();

  const GlobalPlan& plan = track.plan;
  const double total = plan.total_length();
  const std::vector<Track::GateProgress> gates = track.gate_progress();

  LapResult lap;
  lap.mode = mode;
  lap.target_speed = target_speed;
  lap.seed = seed;
  lap.turn_outcomes.assign(gates.size(), TurnOutcome::kPassed);

  Simulator sim(field, local.sim);
  VehicleState start;
  const Vec2 origin = plan.point_at_progress(0.0);
  start.position_x = origin.x;
  start.position_y = origin.y;
  start.heading = plan.heading_at_arclength(0.0);
  sim.reset_state(start);

  Controller controller(&track, local.controller, params);

  // Stationary warm-up fills the IMU window before the lap clock starts.
  const int samples_per_tick = local.sim.control_substeps() / local.sim.imu_substeps();
  const int warmup_ticks = (Simulator::kImuWindowLen + samples_per_tick - 1) / samples_per_tick;
  for (int i = 0; i < warmup_ticks; ++i) sim.tick_control(ControlInput(0.0, 0.0));
  const double t0 = sim.state().time;

  bool collided = false;
  const Simulator::Observer observer = [&](const VehicleState& st) {
    if (collided) return;
    const Vec2 pos = st.position();
    for (const auto& polyline : track.boundaries) {
      for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        if (dist_point_segment_sq(pos, polyline[i], polyline[i + 1]) <=
            local.footprint_radius * local.footprint_radius) {
          collided = true;
          return;
        }
      }
    }
  };

  double unwrapped = 0.0;
  double prev_s = 0.0;
  std::deque<std::pair<double, double>> progress_hist;  // (time, arclength)
  progress_hist.emplace_back(t0, 0.0);
  double cross_sum = 0.0;
  int cross_count = 0;
  ControlInput last_cmd;

  auto record_point = [&](const VehicleState& st, const ControlInput& cmd) {
    lap.trajectory.push_back({st.time - t0, st.position_x, st.position_y, st.heading,
                              st.linear_speed, st.yaw_rate, cmd.velocity, cmd.curvature});
  };

  try {
    while (true) {
      const VehicleState state = sim.state();
      if (state.time - t0 > local.lap_timeout) {
        lap.faulted = true;
        lap.fault_reason = "lap timed out after " + std::to_string(local.lap_timeout) + " s";
        break;
      }

      const std::vector<double> window = sim.imu_window();
      const ControlDecision decision = controller.step(state, window);
      last_cmd = decision.u;
      record_point(state, decision.u);

      const double s_here = controller.current_progress();
      const Vec2 on_plan = plan.point_at_progress(s_here);
      const double cross = (state.position() - on_plan).norm();
      cross_sum += cross;
      ++cross_count;
      lap.max_cross_track = std::max(lap.max_cross_track, cross);

      sim.tick_control(decision.u, observer);

      VehicleState probe = sim.state();
      const double s_new = project(plan, probe, prev_s);
      double delta = s_new - prev_s;
      if (delta < -0.5) delta += 1.0;
      unwrapped += delta;
      prev_s = s_new;

      const double now = sim.state().time;
      progress_hist.emplace_back(now, unwrapped * total);
      while (progress_hist.size() >= 2 &&
             progress_hist[1].first <= now - local.stuck_window) {
        progress_hist.pop_front();
      }
      const bool stuck = progress_hist.front().first <= now - local.stuck_window &&
                         unwrapped * total - progress_hist.front().second <
                             local.stuck_distance;

      if (collided || stuck) {
        const TurnOutcome outcome = collided ? TurnOutcome::kCollision : TurnOutcome::kStuck;
        // Attribute to the upcoming turn: the one whose exit is next ahead.
        int turn = -1;
        double best_exit = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < gates.size(); ++g) {
          if (gates[g].exit_s > unwrapped && gates[g].exit_s < best_exit) {
            best_exit = gates[g].exit_s;
            turn = static_cast<int>(g);
          }
        }
        double reset_s;
        if (turn >= 0) {
          lap.turn_outcomes[static_cast<std::size_t>(turn)] = outcome;
          reset_s = gates[static_cast<std::size_t>(turn)].exit_s + local.reset_advance / total;
        } else {
          ++lap.off_turn_failures;
          reset_s = unwrapped + local.reset_advance / total;
        }

        if (reset_s >= 1.0) {
          lap.completed = true;
          lap.lap_time = sim.state().time - t0;
          record_point(sim.state(), last_cmd);
          break;
        }

        VehicleState fresh;
        const Vec2 p = plan.point_at_progress(reset_s);
        fresh.position_x = p.x;
        fresh.position_y = p.y;
        fresh.heading = plan.heading_at_arclength(reset_s * total);
        fresh.time = sim.state().time;
        sim.reset_state(fresh);
        controller.reset_progress(reset_s);
        prev_s = reset_s;
        unwrapped = reset_s;
        progress_hist.clear();
        progress_hist.emplace_back(fresh.time, reset_s * total);
        collided = false;
        continue;
      }

      if (unwrapped >= 1.0) {
        lap.completed = true;
        lap.lap_time = sim.state().time - t0;
        record_point(sim.state(), last_cmd);
        break;
      }
    }
  } catch (const SimulationFault& fault) {
    lap.faulted = true;
    lap.fault_reason = fault.what();
    lap.completed = false;
  }

  if (lap.faulted) {
    lap.completed = false;
    if (lap.trajectory.empty()) record_point(sim.state(), last_cmd);
  }
  lap.mean_cross_track = cross_count > 0 ? cross_sum / cross_count : 0.0;
  if (lap.completed && lap.trajectory.size() >= 2) {
    lap.objective_j = objective_J(lap.trajectory, plan, local.gamma);
  }
  return lap;
}

BenchmarkRun run_benchmark(const Track& track, const TerrainField& field,
                           const BenchmarkConfig& cfg, const ParameterSet* full_params,
                           const ParameterSet* ablated_params) {
  cfg.validate();
  for (ControllerMode mode : cfg.modes) {
    if (mode == ControllerMode::kLearned && !full_params) {
      throw ValidationError("learned mode needs trained parameters");
    }
    if (mode == ControllerMode::kAblated && !ablated_params) {
      throw ValidationError("ablated mode needs trained ablated parameters");
    }
  }

  struct Job {
    ControllerMode mode;
    double speed;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (ControllerMode mode : cfg.modes) {
    for (std::size_t vi = 0; vi < cfg.speeds.size(); ++vi) {
      for (int k = 0; k < cfg.laps_per_cell; ++k) {
        const std::uint64_t seed =
            cfg.base_seed + vi * static_cast<std::size_t>(cfg.laps_per_cell) +
            static_cast<std::size_t>(k);
        jobs.push_back({mode, cfg.speeds[vi], seed});
      }
    }
  }

  BenchmarkRun run;
  run.laps.resize(jobs.size());
  auto lap_params = [&](ControllerMode mode) -> const ParameterSet* {
    if (mode == ControllerMode::kLearned) return full_params;
    if (mode == ControllerMode::kAblated) return ablated_params;
    return nullptr;
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&]() {
    for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) {
      try {
        const Job& job = jobs[j];
        run.laps[j] = run_lap(track, field, job.mode, job.speed, job.seed, cfg.eval,
                              lap_params(job.mode));
      } catch (...) {
        std::lock_guard<std::mutex> guard(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  const int workers = std::min<int>(cfg.workers, static_cast<int>(jobs.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  BenchmarkReport& report = run.report;
  report.base_seed = cfg.base_seed;
  report.world_hash = hash_combine(terrain_hash(field), track_hash(track));
  report.gamma = cfg.eval.gamma;
  report.laps_per_cell = cfg.laps_per_cell;
  report.modes = cfg.modes;
  report.speeds = cfg.speeds;

  const std::size_t gate_count = track.turn_gates.size();
  std::size_t job_index = 0;
  for (ControllerMode mode : cfg.modes) {
    ModeStats mode_stats;
    mode_stats.mode = mode;
    std::vector<TurnStats> turn_stats(gate_count);
    for (std::size_t g = 0; g < gate_count; ++g) {
      turn_stats[g].mode = mode;
      turn_stats[g].turn = track.turn_gates[g].label;
    }

    for (double speed : cfg.speeds) {
      CellStats cell;
      cell.mode = mode;
      cell.speed = speed;
      double cross_sum = 0.0, time_sum = 0.0, objective_sum = 0.0;
      for (int k = 0; k < cfg.laps_per_cell; ++k, ++job_index) {
        const LapResult& lap = run.laps[job_index];
        ++cell.laps;
        ++mode_stats.laps;
        if (lap.faulted) {
          ++cell.faulted_laps;
          ++mode_stats.faulted_laps;
          continue;
        }
        cell.turn_attempts += static_cast<int>(gate_count);
        cross_sum += lap.mean_cross_track;
        time_sum += lap.lap_time;
        objective_sum += lap.objective_j;
        for (std::size_t g = 0; g < gate_count; ++g) {
          ++turn_stats[g].attempts;
          if (lap.turn_outcomes[g] != TurnOutcome::kPassed) {
            ++cell.failures;
            ++turn_stats[g].failures;
            if (lap.turn_outcomes[g] == TurnOutcome::kCollision) ++cell.collisions;
            if (lap.turn_outcomes[g] == TurnOutcome::kStuck) ++cell.stucks;
          }
        }
      }
      const int clean_laps = cell.laps - cell.faulted_laps;
      if (cell.turn_attempts > 0) {
        cell.failure_rate = static_cast<double>(cell.failures) / cell.turn_attempts;
        cell.success_rate = 1.0 - *cell.failure_rate;
      }
      if (clean_laps > 0) {
        cell.mean_cross_track = cross_sum / clean_laps;
        cell.mean_lap_time = time_sum / clean_laps;
        cell.mean_objective = objective_sum / clean_laps;
      }
      mode_stats.turn_attempts += cell.turn_attempts;
      mode_stats.failures += cell.failures;
      report.per_cell.push_back(cell);
    }

    for (TurnStats& ts : turn_stats) {
      if (ts.attempts > 0) {
        ts.failure_rate = static_cast<double>(ts.failures) / ts.attempts;
      }
      report.per_turn.push_back(ts);
    }
    if (mode_stats.turn_attempts > 0) {
      mode_stats.success_rate =
          1.0 - static_cast<double>(mode_stats.failures) / mode_stats.turn_attempts;
    }
    report.overall.push_back(mode_stats);
  }
  return run;
}

std::string report_to_json(const BenchmarkReport& report) {
  ordered_json j;
  j["schema"] = "ikd-benchmark-report";
  j["version"] = 1;
  j["base_seed"] = report.base_seed;
  j["world_hash"] = hash_to_string(report.world_hash);
  j["gamma"] = report.gamma;
  j["laps_per_cell"] = report.laps_per_cell;
  j["modes"] = ordered_json::array();
  for (ControllerMode m : report.modes) j["modes"].push_back(to_string(m));
  j["speeds"] = report.speeds;

  j["per_cell"] = ordered_json::array();
  for (const CellStats& c : report.per_cell) {
    ordered_json jc;
    jc["mode"] = to_string(c.mode);
    jc["speed"] = c.speed;
    jc["laps"] = c.laps;
    jc["faulted_laps"] = c.faulted_laps;
    jc["turn_attempts"] = c.turn_attempts;
    jc["failures"] = c.failures;
    jc["collisions"] = c.collisions;
    jc["stucks"] = c.stucks;
    set_rate(jc, "failure_rate", c.failure_rate);
    set_rate(jc, "success_rate", c.success_rate);
    set_rate(jc, "mean_cross_track", c.mean_cross_track);
    set_rate(jc, "mean_lap_time", c.mean_lap_time);
    set_rate(jc, "mean_objective", c.mean_objective);
    j["per_cell"].push_back(jc);
  }

  j["per_turn"] = ordered_json::array();
  for (const TurnStats& t : report.per_turn) {
    ordered_json jt;
    jt["mode"] = to_string(t.mode);
    jt["turn"] = t.turn;
    jt["attempts"] = t.attempts;
    jt["failures"] = t.failures;
    set_rate(jt, "failure_rate", t.failure_rate);
    j["per_turn"].push_back(jt);
  }

  j["overall"] = ordered_json::array();
  for (const ModeStats& m : report.overall) {
    ordered_json jm;
    jm["mode"] = to_string(m.mode);
    jm["laps"] = m.laps;
    jm["faulted_laps"] = m.faulted_laps;
    jm["turn_attempts"] = m.turn_attempts;
    jm["failures"] = m.failures;
    set_rate(jm, "success_rate", m.success_rate);
    j["overall"].push_back(jm);
  }
  return j.dump(2) + "\n";
}

BenchmarkReport report_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatFault(std::string("malformed report JSON: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != "ikd-benchmark-report") {
      throw FormatFault("not a benchmark report");
    }
    if (j.at("version").get<int>() != 1) throw FormatFault("unsupported report version");

    BenchmarkReport report;
    report.base_seed = j.at("base_seed").get<std::uint64_t>();
    report.world_hash = hash_from_string(j.at("world_hash").get<std::string>());
    report.gamma = j.at("gamma").get<double>();
    report.laps_per_cell = j.at("laps_per_cell").get<int>();
    for (const auto& m : j.at("modes")) report.modes.push_back(parse_mode(m.get<std::string>()));
    report.speeds = j.at("speeds").get<std::vector<double>>();

    for (const auto& jc : j.at("per_cell")) {
      CellStats c;
      c.mode = parse_mode(jc.at("mode").get<std::string>());
      c.speed = jc.at("speed").get<double>();
      c.laps = jc.at("laps").get<int>();
      c.faulted_laps = jc.at("faulted_laps").get<int>();
      c.turn_attempts = jc.at("turn_attempts").get<int>();
      c.failures = jc.at("failures").get<int>();
      c.collisions = jc.at("collisions").get<int>();
      c.stucks = jc.at("stucks").get<int>();
      c.failure_rate = get_rate(jc, "failure_rate");
      c.success_rate = get_rate(jc, "success_rate");
      c.mean_cross_track = get_rate(jc, "mean_cross_track");
      c.mean_lap_time = get_rate(jc, "mean_lap_time");
      c.mean_objective = get_rate(jc, "mean_objective");
      report.per_cell.push_back(c);
    }
    for (const auto& jt : j.at("per_turn")) {
      TurnStats t;
      t.mode = parse_mode(jt.at("mode").get<std::string>());
      t.turn = jt.at("turn").get<std::string>();
      t.attempts = jt.at("attempts").get<int>();
      t.failures = jt.at("failures").get<int>();
      t.failure_rate = get_rate(jt, "failure_rate");
      report.per_turn.push_back(t);
    }
    for (const auto& jm : j.at("overall")) {
      ModeStats m;
      m.mode = parse_mode(jm.at("mode").get<std::string>());
      m.laps = jm.at("laps").get<int>();
      m.faulted_laps = jm.at("faulted_laps").get<int>();
      m.turn_attempts = jm.at("turn_attempts").get<int>();
      m.failures = jm.at("failures").get<int>();
      m.success_rate = get_rate(jm, "success_rate");
      report.overall.push_back(m);
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw FormatFault(std::string("benchmark report missing fields: ") + e.what());
  }
}

void write_trajectory_csv(const std::vector<TrajectoryPoint>& trajectory,
                          const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatFault("cannot open trajectory CSV for writing: " + path);
  os << "time,x,y,heading,speed,yaw_rate,cmd_v,cmd_c\n";
  char line[256];
  for (const TrajectoryPoint& p : trajectory) {
    std::snprintf(line, sizeof(line), "%.6f,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  p.time, p.x, p.y, p.heading, p.speed, p.yaw_rate, p.cmd_v, p.cmd_c);
    os << line;
  }
  if (!os) throw FormatFault("failed writing trajectory CSV: " + path);
}

std::vector<TrajectoryPoint> read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatFault("cannot open trajectory CSV: " + path);
  std::string header;
  std::getline(is, header);
  if (header != "time,x,y,heading,speed,yaw_rate,cmd_v,cmd_c") {
    throw FormatFault("unexpected trajectory CSV header: " + path);
  }
  std::vector<TrajectoryPoint> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    TrajectoryPoint p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &p.time, &p.x, &p.y,
                    &p.heading, &p.speed, &p.yaw_rate, &p.cmd_v, &p.cmd_c) != 8) {
      throw FormatFault("malformed trajectory CSV row: " + line);
    }
    out.push_back(p);
  }
  return out;
}

void export_report(const BenchmarkRun& run, const std::string& out_dir) {
  if (run.laps.empty()) throw ValidationError("cannot export a benchmark with no laps");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "laps");

  {
    std::ofstream os(fs::path(out_dir) / "report.json", std::ios::trunc);
    if (!os) throw FormatFault("cannot open report.json for writing");
    os << report_to_json(run.report);
  }

  char name[128];
  for (std::size_t i = 0; i < run.laps.size(); ++i) {
    const LapResult& lap = run.laps[i];
    std::snprintf(name, sizeof(name), "lap_%04zu_%s_%.2fmps.csv", i,
                  to_string(lap.mode).c_str(), lap.target_speed);
    write_trajectory_csv(lap.trajectory, (fs::path(out_dir) / "laps" / name).string());
  }

  {
    std::ofstream os(fs::path(out_dir) / "speed_failure_rates.csv", std::ios::trunc);
    if (!os) throw FormatFault("cannot open speed_failure_rates.csv for writing");
    os << "mode,speed,laps,faulted_laps,turn_attempts,failures,failure_rate\n";
    char line[160];
    for (const CellStats& c : run.report.per_cell) {
      std::snprintf(line, sizeof(line), "%s,%.3f,%d,%d,%d,%d,", to_string(c.mode).c_str(),
                    c.speed, c.laps, c.faulted_laps, c.turn_attempts, c.failures);
      os << line;
      if (c.failure_rate) {
        std::snprintf(line, sizeof(line), "%.6f", *c.failure_rate);
        os << line;
      }
      os << "\n";
    }
  }

  {
    std::ofstream os(fs::path(out_dir) / "turn_failure_rates.csv", std::ios::trunc);
    if (!os) throw FormatFault("cannot open turn_failure_rates.csv for writing");
    os << "mode,turn,attempts,failures,failure_rate\n";
    char line[160];
    for (const TurnStats& t : run.report.per_turn) {
      std::snprintf(line, sizeof(line), "%s,%s,%d,%d,", to_string(t.mode).c_str(),
                    t.turn.c_str(), t.attempts, t.failures);
      os << line;
      if (t.failure_rate) {
        std::snprintf(line, sizeof(line), "%.6f", *t.failure_rate);
        os << line;
      }
      os << "\n";
    }
  }
}

}  // namespace ikd
