#include "ikd/world_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ikd/error.hpp"
#include "ikd/hash.hpp"

namespace ikd {

namespace {

using ordered_json = nlohmann::ordered_json;

Vec2 parse_point(const ordered_json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatFault("point must be a [x, y] pair");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

std::vector<Vec2> parse_points(const ordered_json& j) {
  std::vector<Vec2> out;
  for (const auto& p : j) out.push_back(parse_point(p));
  return out;
}

ordered_json point_json(const Vec2& p) { return ordered_json::array({p.x, p.y}); }

ordered_json points_json(const std::vector<Vec2>& pts) {
  ordered_json j = ordered_json::array();
  for (const Vec2& p : pts) j.push_back(point_json(p));
  return j;
}

TerrainParams parse_params(const ordered_json& j) {
  TerrainParams p;
  p.grip = j.at("grip").get<double>();
  p.roughness = j.at("roughness").get<double>();
  p.drag = j.at("drag").get<double>();
  return p;
}

void check_params(const TerrainParams& p, const std::string& where,
                  std::vector<std::string>& out) {
  if (!std::isfinite(p.grip) || !std::isfinite(p.roughness) || !std::isfinite(p.drag)) {
    out.push_back(where + ": non-finite terrain parameter");
    return;
  }
  if (!(p.grip > 0.0) || p.grip > 1.0) {
    out.push_back(where + ": grip must lie in (0, 1], got " + std::to_string(p.grip));
  }
  if (p.roughness < 0.0) {
    out.push_back(where + ": roughness must be >= 0, got " + std::to_string(p.roughness));
  }
  if (p.drag < 0.0) {
    out.push_back(where + ": drag must be >= 0, got " + std::to_string(p.drag));
  }
}

}  // namespace

World parse_world(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatFault(std::string("malformed world JSON: ") + e.what());
  }

  try {
    if (j.at("schema").get<std::string>() != "ikd-world") {
      throw FormatFault("not a world file (schema mismatch)");
    }
    if (j.at("version").get<int>() != 1) throw FormatFault("unsupported world version");

    TerrainField field;
    const auto& jt = j.at("terrain");
    field.nominal = parse_params(jt.at("nominal"));
    if (jt.contains("patches")) {
      for (const auto& jp : jt.at("patches")) {
        TerrainPatch patch;
        patch.boundary = parse_points(jp.at("polygon"));
        patch.params = parse_params(jp);
        field.patches.push_back(std::move(patch));
      }
    }

    const auto& jk = j.at("track");
    GlobalPlan plan(parse_points(jk.at("waypoints")), jk.at("closed").get<bool>());
    Track track{std::move(plan), {}, {}};
    if (jk.contains("boundaries")) {
      for (const auto& jb : jk.at("boundaries")) track.boundaries.push_back(parse_points(jb));
    }
    if (jk.contains("turn_gates")) {
      for (const auto& jg : jk.at("turn_gates")) {
        TurnGate gate;
        gate.label = jg.at("label").get<std::string>();
        const std::vector<Vec2> entry = parse_points(jg.at("entry"));
        const std::vector<Vec2> exit = parse_points(jg.at("exit"));
        if (entry.size() != 2 || exit.size() != 2) {
          throw FormatFault("turn gate segments must have exactly two endpoints");
        }
        gate.entry_a = entry[0];
        gate.entry_b = entry[1];
        gate.exit_a = exit[0];
        gate.exit_b = exit[1];
        track.turn_gates.push_back(std::move(gate));
      }
    }
    return World{std::move(field), std::move(track)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatFault(std::string("world file missing fields: ") + e.what());
  }
}

World load_world(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatFault("cannot open world file: " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_world(buffer.str());
}

std::string world_to_json(const World& world) {
  ordered_json j;
  j["schema"] = "ikd-world";
  j["version"] = 1;

  ordered_json jt;
  jt["nominal"] = {{"grip", world.terrain.nominal.grip},
                   {"roughness", world.terrain.nominal.roughness},
                   {"drag", world.terrain.nominal.drag}};
  jt["patches"] = ordered_json::array();
  for (const TerrainPatch& p : world.terrain.patches) {
    ordered_json jp;
    jp["polygon"] = points_json(p.boundary);
    jp["grip"] = p.params.grip;
    jp["roughness"] = p.params.roughness;
    jp["drag"] = p.params.drag;
    jt["patches"].push_back(jp);
  }
  j["terrain"] = jt;

  ordered_json jk;
  // Densified points round-trip exactly; the original coarse waypoints are
  // not retained by GlobalPlan.
  jk["waypoints"] = points_json(world.track.plan.points());
  jk["closed"] = world.track.plan.closed();
  jk["boundaries"] = ordered_json::array();
  for (const auto& b : world.track.boundaries) jk["boundaries"].push_back(points_json(b));
  jk["turn_gates"] = ordered_json::array();
  for (const TurnGate& g : world.track.turn_gates) {
    ordered_json jg;
    jg["label"] = g.label;
    jg["entry"] = ordered_json::array({point_json(g.entry_a), point_json(g.entry_b)});
    jg["exit"] = ordered_json::array({point_json(g.exit_a), point_json(g.exit_b)});
    jk["turn_gates"].push_back(jg);
  }
  j["track"] = jk;
  return j.dump(2) + "\n";
}

void save_world(const World& world, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatFault("cannot open world file for writing: " + path);
  os << world_to_json(world);
  if (!os) throw FormatFault("failed writing world file: " + path);
}

std::vector<std::string> validate_world(const World& world) {
  std::vector<std::string> out;

  check_params(world.terrain.nominal, "terrain.nominal", out);
  for (std::size_t i = 0; i < world.terrain.patches.size(); ++i) {
    const TerrainPatch& p = world.terrain.patches[i];
    const std::string where = "terrain.patches[" + std::to_string(i) + "]";
    check_params(p.params, where, out);
    if (p.boundary.size() < 3) {
      out.push_back(where + ": polygon needs at least 3 vertices");
    } else if (!polygon_is_simple(p.boundary)) {
      out.push_back(where + ": polygon is self-intersecting");
    }
  }

  for (std::size_t i = 0; i < world.track.boundaries.size(); ++i) {
    if (world.track.boundaries[i].size() < 2) {
      out.push_back("track.boundaries[" + std::to_string(i) +
                    "]: polyline needs at least 2 points");
    }
  }

  std::set<std::string> labels;
  for (std::size_t i = 0; i < world.track.turn_gates.size(); ++i) {
    const TurnGate& g = world.track.turn_gates[i];
    const std::string where = "track.turn_gates[" + std::to_string(i) + "] (" + g.label + ")";
    if (!labels.insert(g.label).second) out.push_back(where + ": duplicate label");

    double entry_s = -1.0, exit_s = -1.0;
    try {
      entry_s = gate_crossing_progress(world.track.plan, g.entry_a, g.entry_b);
    } catch (const ValidationError& e) {
      out.push_back(where + ": entry gate: " + e.what());
    }
    try {
      exit_s = gate_crossing_progress(world.track.plan, g.exit_a, g.exit_b);
    } catch (const ValidationError& e) {
      out.push_back(where + ": exit gate: " + e.what());
    }
    if (entry_s >= 0.0 && exit_s >= 0.0 && entry_s >= exit_s) {
      out.push_back(where + ": entry must cross the plan before exit");
    }
  }
  return out;
}

std::uint64_t world_hash(const World& world) {
  return hash_combine(terrain_hash(world.terrain), track_hash(world.track));
}

}  // namespace ikd
