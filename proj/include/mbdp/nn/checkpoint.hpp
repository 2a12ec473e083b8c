#pragma once

#include <string>

#include "mbdp/nn/mlp.hpp"

namespace mbdp::nn {

/// Writes `<path_base>.bin` (raw little-endian float64, per layer W
/// column-major then b) and `<path_base>.txt` (shape manifest).
void save_mlp(const Mlp& net, const std::string& path_base);

/// Reads the manifest, rebuilds the net and loads the flat parameter blob.
/// Throws on shape/byte-count mismatch.
Mlp load_mlp(const std::string& path_base);

}  // namespace mbdp::nn
