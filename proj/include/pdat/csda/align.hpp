#ifndef PDAT_CSDA_ALIGN_HPP
#define PDAT_CSDA_ALIGN_HPP

#include <vector>

namespace pdat::csda {

// Hungarian assignment: returns, for each row, the column of a minimum-cost
// perfect matching on a square cost matrix.
std::vector<int> hungarian_min(const std::vector<std::vector<double>>& cost);

struct Alignment {
  std::vector<int> permutation;  // permutation[old_label] = new_label
  std::vector<int> relabeled;
};

// Permutes `other` cluster indices to best agree with `reference` by
// maximum-weight matching on the label co-occurrence matrix. Both label
// lists must cover the same samples with the same cluster count.
Alignment align_stage_labels(const std::vector<int>& reference_labels,
                             const std::vector<int>& other_labels, int num_clusters);

// Stage-weighted voting: the class with the largest summed stage weight
// wins; ties go to the last stage's label when it participates in the tie,
// otherwise to the smallest tied index.
int vote_label(const std::vector<int>& per_stage_labels, const std::vector<double>& weights);

std::vector<int> vote_labels(const std::vector<std::vector<int>>& per_sample_stage_labels,
                             const std::vector<double>& weights);

}  // namespace pdat::csda

#endif
