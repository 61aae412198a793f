#ifndef PDAT_CSDA_DESCRIPTOR_HPP
#define PDAT_CSDA_DESCRIPTOR_HPP

#include <vector>

#include "pdat/nn/ops.hpp"

namespace pdat::csda {

// Pooled correlation response: depthwise valid correlation of the stage
// features, global average pool, L2 normalization. One unit-norm row per
// sample; an all-zero response stays a zero row and is flagged.
struct DescriptorBatch {
  nn::Var rows;                  // (N, C_m)
  std::vector<bool> zero_rows;   // per-sample degenerate flag
};

DescriptorBatch correlation_descriptor(const nn::Var& z_m, const nn::Var& x_m);

}  // namespace pdat::csda

#endif
