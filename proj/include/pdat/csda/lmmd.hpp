#ifndef PDAT_CSDA_LMMD_HPP
#define PDAT_CSDA_LMMD_HPP

#include <vector>

#include "pdat/nn/ops.hpp"

namespace pdat::csda {

// Multi-bandwidth RBF family; the base bandwidth comes from the median
// pairwise distance of the data the kernel is evaluated on.
struct KernelConfig {
  std::vector<double> multipliers = {0.25, 0.5, 1.0, 2.0, 4.0};
};

// Median of all pairwise Euclidean distances within the union of A and B
// rows (even count averages the two middle values).
double median_pairwise_distance(const nn::Tensor& a, const nn::Tensor& b);

struct KernelMatrix {
  nn::Var k;
  double sigma = 1.0;
  bool degenerate_sigma = false;  // zero median replaced by 1
};

// K[i][j] = mean_mu exp(-||a_i - b_j||^2 / (2 (mu sigma)^2)), sigma from the
// median heuristic over A union B, recomputed per call.
KernelMatrix kernel_matrix(const nn::Var& a, const nn::Var& b, const KernelConfig& cfg);

// Normalized one-hot class weights: 1/n_c on members of class c. An empty
// class returns an empty vector (absent marker).
std::vector<double> lmmd_weights(const std::vector<int>& labels, int cls);

struct LmmdResult {
  nn::Var loss;            // scalar, graph-connected to the features
  int classes_used = 0;    // C': classes present in both domains
  bool skipped = false;    // C' == 0
  bool degenerate_sigma = false;
};

// Class-weighted two-sample statistic over the alignment-stage descriptors:
// (1/C') sum_c [w_s^T K_ss w_s + w_t^T K_tt w_t - 2 w_s^T K_st w_t], summed
// over classes present in BOTH domains. One shared bandwidth, taken from
// the union of both feature sets, keeps the statistic non-negative.
LmmdResult lmmd_loss(const nn::Var& feat_s, const nn::Var& feat_t,
                     const std::vector<int>& labels_s, const std::vector<int>& labels_t,
                     int num_classes, const KernelConfig& cfg);

}  // namespace pdat::csda

#endif
