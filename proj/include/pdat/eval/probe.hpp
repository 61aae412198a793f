#ifndef PDAT_EVAL_PROBE_HPP
#define PDAT_EVAL_PROBE_HPP

#include <cstdint>
#include <vector>

#include "pdat/csda/kmeans.hpp"
#include "pdat/csda/lmmd.hpp"

namespace pdat::eval {

struct DomainGapResult {
  double squared_mmd = 0.0;
  double probe_accuracy = 0.5;
};

// Unweighted squared MMD under the project kernel config plus a seeded
// logistic separator trained on an 80/20 split. Requires at least 32
// descriptors per domain.
DomainGapResult domain_gap_probe(const std::vector<csda::Vec>& descriptors_s,
                                 const std::vector<csda::Vec>& descriptors_t,
                                 const csda::KernelConfig& kernel, uint64_t seed);

// Squared MMD alone (no minimum-size requirement); exposed for tests.
double squared_mmd(const std::vector<csda::Vec>& a, const std::vector<csda::Vec>& b,
                   const csda::KernelConfig& kernel);

}  // namespace pdat::eval

#endif
