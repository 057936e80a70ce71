#pragma once

#include <string>

#include "spnf/field.hpp"

namespace spnf {

// `SPNF` magic, u32 format version, length-prefixed JSON header (architecture,
// encoding, training iteration), then all parameters as little-endian f32 in
// declaration order. Written atomically (temp file + rename).
void save_checkpoint(const std::string& path, const FieldParams& params, long iteration);

struct Checkpoint {
    FieldParams params;
    long iteration = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace spnf
