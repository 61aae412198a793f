#include "pdat/csda/descriptor.hpp"

namespace pdat::csda {

DescriptorBatch correlation_descriptor(const nn::Var& z_m, const nn::Var& x_m) {
  nn::Var pooled = nn::global_avg_pool(nn::depthwise_xcorr(z_m, x_m));
  DescriptorBatch out;
  out.rows = nn::l2_normalize_rows(pooled);
  int n = out.rows.shape()[0], d = out.rows.shape()[1];
  out.zero_rows.assign(static_cast<size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    bool all_zero = true;
    for (int j = 0; j < d; ++j)
      if (out.rows.val().at(i, j) != 0.0) {
        all_zero = false;
        break;
      }
    out.zero_rows[static_cast<size_t>(i)] = all_zero;
  }
  return out;
}

}  // namespace pdat::csda
