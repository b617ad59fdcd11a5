#pragma once

// Parameter checkpoint file: named tensors with shapes and raw
// little-endian float64 data. Layout documented in docs/file_formats.md.

#include <string>

#include "nar/tape.hpp"

namespace nar {

void save_checkpoint(const ParamStore& params, const std::string& path);

// Loads a checkpoint into a fresh store. Fails with the offending tensor
// name on truncation or corruption.
ParamStore load_checkpoint(const std::string& path);

}  // namespace nar
