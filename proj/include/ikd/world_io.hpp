#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ikd/plan.hpp"
#include "ikd/terrain.hpp"

namespace ikd {

// A complete evaluation environment: hidden terrain plus the track the
// controllers see.
struct World {
  TerrainField terrain;
  Track track;
};

// Parses a world JSON document. Throws FormatFault on malformed JSON or a
// schema mismatch, ValidationError when the plan cannot be built.
World parse_world(const std::string& text);
World load_world(const std::string& path);

std::string world_to_json(const World& world);
void save_world(const World& world, const std::string& path);

// Invariant checks beyond what construction enforces: parameter ranges,
// patch polygon simplicity, boundary sizes, gate-plan crossings, gate
// ordering, label uniqueness. Returns one message per violation.
std::vector<std::string> validate_world(const World& world);

// Combined content hash of terrain and track, for provenance.
std::uint64_t world_hash(const World& world);

}  // namespace ikd
