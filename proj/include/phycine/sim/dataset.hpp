#pragma once

#include <string>
#include <vector>

#include "phycine/sim/episode.hpp"

namespace phycine::sim {

// Binary episode container, magic "PHYD", little-endian, with a JSON manifest
// sidecar at <path>.manifest.json (episode count, per-episode category/seed,
// physics constants).
void write_dataset(const std::string& path, const std::vector<Episode>& episodes,
                   const GenConfig& cfg);

std::vector<Episode> read_dataset(const std::string& path);

// Physics/generation constants recorded in the manifest, needed by probes.
GenConfig read_dataset_config(const std::string& path);

std::string manifest_path(const std::string& dataset_path);

// counts[c] episodes of category c+1; episode seeds derive from (seed,
// category, index) so any subset regenerates identically.
std::vector<Episode> generate_dataset(const GenConfig& cfg, const std::vector<int>& counts,
                                      std::uint64_t seed);

}  // namespace phycine::sim
