#pragma once

#include <string>

#include "slatelab/tensor.hpp"

namespace slatelab {

/// Binary checkpoint: fixed magic, format version, module kind, then each
/// named tensor (name, shape, little-endian 64-bit floats) in name order.
/// Round-trips are byte-identical.
void save_checkpoint(const std::string& path, const std::string& kind,
                     const ParamStore& params);

struct Checkpoint {
  std::string kind;
  ParamStore params;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace slatelab
