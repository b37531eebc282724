#pragma once

#include <string>

#include "ketlab/model.hpp"

namespace ketlab {

// Versioned binary checkpoint, all fields little-endian:
//   u32 magic "KETL"            u32 version (1)
//   i32 variant, layers, width, heads, context, vocab,
//       topo_k, topo_dim, block_size, denoise_steps
//   f64 carrier_temp            u64 seed
//   u64 param_count             f64[param_count] flat parameters
//                               (registration order, row-major)
//   u64[4] rng state
void save_checkpoint(Model &model, const std::string &path);
Model load_checkpoint(const std::string &path);

}  // namespace ketlab
