#include "pdat/data/batcher.hpp"

#include <algorithm>
#include <random>

#include "pdat/core/common.hpp"
#include "pdat/core/rng.hpp"

namespace pdat::data {

BatchStream::BatchStream(const std::vector<DomainSample>* source,
                         const std::vector<DomainSample>* target, int batch_size, uint64_t seed)
    : source_(source), target_(target), seed_(seed) {
  if (!source_ || source_->empty()) throw DataError("BatchStream: empty source dataset");
  if (!target_ || target_->empty()) throw DataError("BatchStream: empty target dataset");
  if (batch_size < 2 || batch_size % 2 != 0)
    throw DataError("BatchStream: batch_size must be even and >= 2");
  half_ = batch_size / 2;
  int longest = static_cast<int>(std::max(source_->size(), target_->size()));
  iters_per_epoch_ = (longest + half_ - 1) / half_;
}

std::vector<int> BatchStream::permutation(int n, uint64_t stream) const {
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  std::mt19937_64 rng(stream);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

BatchStream::Batch BatchStream::batch(int epoch, int iter) const {
  Batch out;
  auto pick = [&](const std::vector<DomainSample>& data, const char* tag,
                  std::vector<const DomainSample*>& dst) {
    int n = static_cast<int>(data.size());
    for (int k = 0; k < half_; ++k) {
      long long pos = static_cast<long long>(iter) * half_ + k;
      int cycle = static_cast<int>(pos / n);
      int idx = static_cast<int>(pos % n);
      std::vector<int> perm = permutation(
          n, derive_seed(seed_, std::string(tag) + ":" + std::to_string(epoch) + ":" +
                                    std::to_string(cycle)));
      dst.push_back(&data[static_cast<size_t>(perm[static_cast<size_t>(idx)])]);
    }
  };
  pick(*source_, "src", out.source);
  pick(*target_, "tgt", out.target);
  return out;
}

}  // namespace pdat::data
