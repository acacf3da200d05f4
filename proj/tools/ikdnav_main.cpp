#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ikd/control.hpp"
#include "ikd/data.hpp"
#include "ikd/error.hpp"
#include "ikd/eval.hpp"
#include "ikd/nn.hpp"
#include "ikd/world_io.hpp"

namespace {

using ikd::FormatFault;
using ikd::ValidationError;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> controller;
  bool ablated = false;
  std::optional<int> workers;
  std::optional<std::string> out;
};

ordered_json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatFault("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  try {
    ordered_json j = ordered_json::parse(buffer.str());
    if (j.at("schema").get<std::string>() != "ikd-config") {
      throw FormatFault("not a config file (schema mismatch): " + path);
    }
    if (j.at("version").get<int>() != 1) throw FormatFault("unsupported config version");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatFault("malformed config " + path + ": " + e.what());
  }
}

// Paths in the config resolve relative to the config file's directory.
std::string resolve(const std::string& config_path, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(config_path).parent_path() / p).string();
}

std::string require_file(const std::string& config_path, const ordered_json& section,
                         const char* key) {
  if (!section.contains(key)) {
    throw ValidationError(std::string("config is missing '") + key + "'");
  }
  const std::string path = resolve(config_path, section.at(key).get<std::string>());
  if (!fs::exists(path)) {
    throw ValidationError(std::string("referenced file does not exist: ") + path);
  }
  return path;
}

template <typename T>
void maybe_get(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ikd::SimConfig sim_from_config(const ordered_json& cfg) {
  ikd::SimConfig sim;
  if (cfg.contains("sim")) {
    const auto& j = cfg.at("sim");
    maybe_get(j, "physics_dt", sim.physics_dt);
    maybe_get(j, "imu_dt", sim.imu_dt);
    maybe_get(j, "control_dt", sim.control_dt);
    maybe_get(j, "max_accel", sim.max_accel);
    maybe_get(j, "speed_lag_tau", sim.speed_lag_tau);
    maybe_get(j, "steer_lag_tau", sim.steer_lag_tau);
    maybe_get(j, "understeer_gain", sim.understeer_gain);
    maybe_get(j, "vibration_gain", sim.vibration_gain);
  }
  return sim;
}

std::uint64_t seed_from(const ordered_json& cfg, const CliOptions& opt) {
  if (opt.seed) return *opt.seed;
  std::uint64_t seed = 0;
  maybe_get(cfg, "seed", seed);
  return seed;
}

ikd::World load_config_world(const std::string& config_path, const ordered_json& cfg) {
  return ikd::load_world(require_file(config_path, cfg, "world"));
}

void print_histogram(const char* name, const ikd::CoverageHistogram& h) {
  int occupied = 0;
  for (int c : h.counts) occupied += c > 0 ? 1 : 0;
  std::printf("%s coverage [%.2f, %.2f]: %d/%zu bins occupied\n", name, h.lo, h.hi, occupied,
              h.counts.size());
  std::printf("  counts:");
  for (int c : h.counts) std::printf(" %d", c);
  std::printf("\n");
}

int cmd_validate(const CliOptions& opt) {
  const ordered_json cfg = load_config(opt.config_path);
  const ikd::World world = load_config_world(opt.config_path, cfg);
  const std::vector<std::string> diagnostics = ikd::validate_world(world);
  for (const std::string& d : diagnostics) std::printf("violation: %s\n", d.c_str());
  if (!diagnostics.empty()) {
    std::printf("world invalid: %zu violation(s)\n", diagnostics.size());
    return 1;
  }
  std::printf("world ok: %zu patches, %zu boundaries, %zu turn gates, hash 0x%016llx\n",
              world.terrain.patches.size(), world.track.boundaries.size(),
              world.track.turn_gates.size(),
              static_cast<unsigned long long>(ikd::world_hash(world)));
  return 0;
}

int cmd_collect(const CliOptions& opt) {
  const ordered_json cfg = load_config(opt.config_path);
  const ikd::World world = load_config_world(opt.config_path, cfg);
  if (!cfg.contains("collect")) throw ValidationError("config has no 'collect' section");
  const auto& j = cfg.at("collect");

  const std::uint64_t seed = seed_from(cfg, opt);
  ikd::SimConfig sim = sim_from_config(cfg);
  sim.rng_seed = seed + 1;

  ikd::ExplorationPolicy policy;
  policy.rng_seed = seed;
  maybe_get(j, "dwell", policy.dwell);
  maybe_get(j, "v_step", policy.v_step);
  maybe_get(j, "c_step", policy.c_step);
  maybe_get(j, "jump_probability", policy.jump_probability);
  if (j.contains("arena_center")) {
    policy.arena_center = {j.at("arena_center").at(0).get<double>(),
                           j.at("arena_center").at(1).get<double>()};
  }
  maybe_get(j, "arena_radius", policy.arena_radius);

  double duration = 0.0;
  maybe_get(j, "duration", duration);

  const ikd::Dataset dataset = ikd::collect(world.terrain, sim, policy, duration);

  std::string out_path = opt.out ? *opt.out : resolve(opt.config_path, j.at("out").get<std::string>());
  fs::create_directories(fs::path(out_path).parent_path());
  ikd::save_dataset(dataset, out_path);

  std::printf("collected %zu samples over %.1f s (seed %llu) -> %s\n", dataset.size(),
              duration, static_cast<unsigned long long>(seed), out_path.c_str());
  print_histogram("speed", ikd::command_speed_histogram(dataset));
  print_histogram("curvature", ikd::command_curvature_histogram(dataset));
  return 0;
}

int cmd_train(const CliOptions& opt) {
  const ordered_json cfg = load_config(opt.config_path);
  if (!cfg.contains("train")) throw ValidationError("config has no 'train' section");
  const auto& j = cfg.at("train");

  const ikd::Dataset dataset = ikd::load_dataset(require_file(opt.config_path, j, "dataset"));

  ikd::TrainConfig tc;
  tc.rng_seed = seed_from(cfg, opt);
  maybe_get(j, "learning_rate", tc.learning_rate);
  maybe_get(j, "batch_size", tc.batch_size);
  maybe_get(j, "epochs", tc.epochs);
  maybe_get(j, "validation_fraction", tc.validation_fraction);

  ikd::LossWeights weights;
  if (j.contains("h")) {
    const auto& h = j.at("h");
    weights.H << h.at(0).at(0).get<double>(), h.at(0).at(1).get<double>(),
        h.at(1).at(0).get<double>(), h.at(1).at(1).get<double>();
  }

  const ikd::NetworkSpec spec =
      opt.ablated ? ikd::NetworkSpec::ablated() : ikd::NetworkSpec::full();
  std::printf("training %s model: %zu samples, %d epochs, batch %d, lr %g, seed %llu\n",
              opt.ablated ? "ablated" : "full", dataset.size(), tc.epochs, tc.batch_size,
              tc.learning_rate, static_cast<unsigned long long>(tc.rng_seed));

  const ikd::TrainResult result = ikd::train(dataset, spec, weights, tc);

  std::string out_path = opt.out ? *opt.out : resolve(opt.config_path, j.at("out").get<std::string>());
  fs::create_directories(fs::path(out_path).parent_path());
  ikd::save_params(result.params, out_path);
  if (j.contains("loss_csv")) {
    ikd::write_loss_csv(result, resolve(opt.config_path, j.at("loss_csv").get<std::string>()));
  }

  const double initial = result.curve.front().val_loss;
  const double final_loss = result.curve[static_cast<std::size_t>(result.best_epoch)].val_loss;
  std::printf("initial val loss %.6e, final val loss %.6e (best epoch %d)\n", initial,
              final_loss, result.best_epoch);
  if (initial > 0.0) {
    std::printf("val loss reduction %.2f%%\n", 100.0 * (1.0 - final_loss / initial));
  }
  std::printf("wall time %.1f s -> %s\n", result.wall_seconds, out_path.c_str());
  return 0;
}

int cmd_bench(const CliOptions& opt) {
  const ordered_json cfg = load_config(opt.config_path);
  const ikd::World world = load_config_world(opt.config_path, cfg);
  if (!cfg.contains("bench")) throw ValidationError("config has no 'bench' section");
  const auto& j = cfg.at("bench");

  ikd::BenchmarkConfig bc;
  bc.base_seed = seed_from(cfg, opt);
  bc.eval.sim = sim_from_config(cfg);
  maybe_get(j, "speeds", bc.speeds);
  maybe_get(j, "laps_per_cell", bc.laps_per_cell);
  maybe_get(j, "workers", bc.workers);
  if (opt.workers) bc.workers = *opt.workers;

  if (j.contains("modes")) {
    bc.modes.clear();
    for (const auto& m : j.at("modes")) bc.modes.push_back(ikd::parse_mode(m.get<std::string>()));
  }
  if (opt.controller) bc.modes = {ikd::parse_mode(*opt.controller)};

  if (j.contains("controller")) {
    const auto& jc = j.at("controller");
    maybe_get(jc, "lookahead", bc.eval.controller.lookahead);
    maybe_get(jc, "num_samples", bc.eval.controller.baseline.num_samples);
    maybe_get(jc, "horizon", bc.eval.controller.baseline.horizon);
    maybe_get(jc, "curvature_window", bc.eval.controller.baseline.curvature_window);
    maybe_get(jc, "max_accel", bc.eval.controller.schedule.max_accel);
    maybe_get(jc, "safety_distance_margin",
              bc.eval.controller.schedule.safety_distance_margin);
  }
  if (j.contains("eval")) {
    const auto& je = j.at("eval");
    maybe_get(je, "footprint_radius", bc.eval.footprint_radius);
    maybe_get(je, "stuck_window", bc.eval.stuck_window);
    maybe_get(je, "stuck_distance", bc.eval.stuck_distance);
    maybe_get(je, "reset_advance", bc.eval.reset_advance);
    maybe_get(je, "lap_timeout", bc.eval.lap_timeout);
    maybe_get(je, "gamma", bc.eval.gamma);
  }

  auto needs = [&](ikd::ControllerMode m) {
    for (ikd::ControllerMode mode : bc.modes) {
      if (mode == m) return true;
    }
    return false;
  };
  std::optional<ikd::ParameterSet> full_params, ablated_params;
  if (needs(ikd::ControllerMode::kLearned)) {
    full_params = ikd::load_params(require_file(opt.config_path, j, "params"));
  }
  if (needs(ikd::ControllerMode::kAblated)) {
    ablated_params = ikd::load_params(require_file(opt.config_path, j, "ablated_params"));
  }

  const ikd::BenchmarkRun run =
      ikd::run_benchmark(world.track, world.terrain, bc,
                         full_params ? &*full_params : nullptr,
                         ablated_params ? &*ablated_params : nullptr);

  const std::string out_dir = opt.out ? *opt.out : resolve(opt.config_path, j.at("out").get<std::string>());
  ikd::export_report(run, out_dir);

  std::printf("benchmark: %zu laps (seed %llu, %d workers) -> %s\n", run.laps.size(),
              static_cast<unsigned long long>(bc.base_seed), bc.workers, out_dir.c_str());
  for (const ikd::ModeStats& m : run.report.overall) {
    std::printf("  %-8s turn attempts %4d, failures %3d, success rate %s\n",
                ikd::to_string(m.mode).c_str(), m.turn_attempts, m.failures,
                m.success_rate ? (std::to_string(*m.success_rate)).c_str() : "n/a");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ikdnav: terrain-aware inverse kinodynamic navigation benchmark"};
  app.require_subcommand(1);

  CliOptions opt;

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    auto* c = sub->add_option("--config", opt.config_path, "config JSON path");
    if (needs_config) c->required();
    sub->add_option("--seed", opt.seed, "override the config seed");
  };

  CLI::App* validate = app.add_subcommand("validate", "check world invariants");
  add_common(validate);

  CLI::App* collect = app.add_subcommand("collect", "run the exploration policy");
  add_common(collect);
  collect->add_option("--out", opt.out, "dataset output path");

  CLI::App* train = app.add_subcommand("train", "fit the inverse model");
  add_common(train);
  train->add_flag("--ablated", opt.ablated, "train the window-free ablation");
  train->add_option("--out", opt.out, "parameter output path");

  CLI::App* bench = app.add_subcommand("bench", "run the lap benchmark");
  add_common(bench);
  bench->add_option("--controller", opt.controller, "restrict to one mode");
  bench->add_option("--workers", opt.workers, "parallel lap workers");
  bench->add_option("--out", opt.out, "report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate->parsed()) return cmd_validate(opt);
    if (collect->parsed()) return cmd_collect(opt);
    if (train->parsed()) return cmd_train(opt);
    if (bench->parsed()) return cmd_bench(opt);
    std::fprintf(stderr, "error: no subcommand\n");
    return 1;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const FormatFault& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fault: %s\n", e.what());
    return 2;
  }
}
