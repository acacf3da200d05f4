#pragma once

#include <cstdint>
#include <vector>

#include "ikd/geometry.hpp"

namespace ikd {

// Hidden per-location ground properties. grip scales how much commanded
// curvature is realized, roughness drives both understeer and vibration,
// drag bleeds off longitudinal speed.
struct TerrainParams {
  double grip{1.0};       // (0, 1]; 1 = ideal
  double roughness{0.0};  // >= 0; 0 = smooth
  double drag{0.0};       // 1/s; >= 0
};

struct TerrainPatch {
  std::vector<Vec2> boundary;  // simple polygon, >= 3 vertices
  TerrainParams params;
};

// Spatial map of terrain parameters. Later patches override earlier ones
// where they overlap; everywhere else the nominal parameters apply.
struct TerrainField {
  std::vector<TerrainPatch> patches;
  TerrainParams nominal;
};

// Total lookup: parameters of the last patch containing the point (points
// on a patch boundary count as inside), else nominal.
TerrainParams terrain_at(const TerrainField& field, const Vec2& point);

// Content hash over nominal parameters and every patch, for provenance.
std::uint64_t terrain_hash(const TerrainField& field);

}  // namespace ikd
