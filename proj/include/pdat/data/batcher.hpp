#ifndef PDAT_DATA_BATCHER_HPP
#define PDAT_DATA_BATCHER_HPP

#include <cstdint>
#include <vector>

#include "pdat/data/pairs.hpp"

namespace pdat::data {

// Mixed-domain batch plan: each step yields batch_size/2 samples from each
// domain. Index order is a pure function of (seed, epoch, cycle), so a
// resumed run replays the exact stream without serialized RNG state. The
// shorter dataset cycles with a fresh shuffle per cycle.
class BatchStream {
 public:
  BatchStream(const std::vector<DomainSample>* source, const std::vector<DomainSample>* target,
              int batch_size, uint64_t seed);

  struct Batch {
    std::vector<const DomainSample*> source;
    std::vector<const DomainSample*> target;
  };

  int iters_per_epoch() const { return iters_per_epoch_; }
  Batch batch(int epoch, int iter) const;

 private:
  std::vector<int> permutation(int n, uint64_t stream) const;
  const std::vector<DomainSample>* source_;
  const std::vector<DomainSample>* target_;
  int half_ = 0;
  int iters_per_epoch_ = 0;
  uint64_t seed_ = 0;
};

}  // namespace pdat::data

#endif
