#pragma once

// Self-describing trajectory container file. One file holds one ProblemSpec
// (as structured text) followed by any number of trajectories; arrays are
// row-major little-endian float64 behind shape headers. Byte layout is
// documented in docs/file_formats.md and covered by a round-trip test.

#include <string>
#include <vector>

#include "nar/feature.hpp"

namespace nar {

std::string spec_to_text(const ProblemSpec& spec);
ProblemSpec spec_from_text(const std::string& text);

void save_trajectories(const ProblemSpec& spec, const std::vector<Trajectory>& trajs,
                       const std::string& path);

struct TrajectoryFile {
  ProblemSpec spec;
  std::vector<Trajectory> trajectories;
};
TrajectoryFile load_trajectories(const std::string& path);

// In-memory encode/decode used by the round-trip and determinism tests.
std::string encode_trajectories(const ProblemSpec& spec, const std::vector<Trajectory>& trajs);
TrajectoryFile decode_trajectories(const std::string& bytes);

}  // namespace nar
