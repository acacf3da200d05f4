#include "ikd/terrain.hpp"

#include "ikd/hash.hpp"

namespace ikd {

namespace {

void hash_double(std::uint64_t& h, double v) {
  h = fnv1a64(&v, sizeof(v), h);
}

}  // namespace

TerrainParams terrain_at(const TerrainField& field, const Vec2& point) {
  TerrainParams result = field.nominal;
  for (const TerrainPatch& patch : field.patches) {
    if (point_in_polygon(point, patch.boundary)) result = patch.params;
  }
  return result;
}

std::uint64_t terrain_hash(const TerrainField& field) {
  std::uint64_t h = kFnvOffset;
  hash_double(h, field.nominal.grip);
  hash_double(h, field.nominal.roughness);
  hash_double(h, field.nominal.drag);
  for (const TerrainPatch& patch : field.patches) {
    hash_double(h, patch.params.grip);
    hash_double(h, patch.params.roughness);
    hash_double(h, patch.params.drag);
    for (const Vec2& v : patch.boundary) {
      hash_double(h, v.x);
      hash_double(h, v.y);
    }
  }
  return h;
}

}  // namespace ikd
