#ifndef PDAT_CSDA_MEMORY_HPP
#define PDAT_CSDA_MEMORY_HPP

#include <array>
#include <deque>
#include <iosfwd>
#include <string>
#include <vector>

#include "pdat/csda/align.hpp"
#include "pdat/csda/kmeans.hpp"
#include "pdat/data/dataset.hpp"

namespace pdat::csda {

// One sample's per-stage descriptors. Keeping all four stages together lets
// the cross-stage co-occurrence alignment use common samples.
struct MemoryEntry {
  std::string sample_id;
  data::Domain domain = data::Domain::source;
  std::array<Vec, 4> desc;
};

// Rolling window of the most recent descriptors, bounded per domain.
class DescriptorMemory {
 public:
  explicit DescriptorMemory(int capacity_per_domain = 256)
      : capacity_(capacity_per_domain) {}

  void push(MemoryEntry entry);
  int size(data::Domain d) const;
  int total() const { return size(data::Domain::source) + size(data::Domain::target); }
  const std::deque<MemoryEntry>& entries(data::Domain d) const {
    return d == data::Domain::source ? source_ : target_;
  }
  int capacity() const { return capacity_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  int capacity_;
  std::deque<MemoryEntry> source_, target_;
};

struct ClusterBankConfig {
  int c_min = 2, c_max = 10;
  KMeansOptions kmeans;
  std::vector<double> vote_weights = {1, 2, 3, 4};
};

struct RefitLog {
  int selected_c = 0;
  std::array<double, 4> silhouettes{};
  bool fallback = false;
  bool zero_variance = false;
  std::vector<int> histogram_source, histogram_target;  // voted labels over memory
};

// Online clustering state: all four stages share the stage-4
// silhouette-selected C; stages 1-3 are index-aligned to stage 4 through
// co-occurrence matching so cross-stage voting is well-posed.
class ClusterBank {
 public:
  explicit ClusterBank(ClusterBankConfig cfg = {}) : cfg_(std::move(cfg)) {}

  bool ready() const { return models_[3].num_clusters > 0; }
  int num_clusters() const { return models_[3].num_clusters; }
  const ClusterBankConfig& config() const { return cfg_; }

  RefitLog refit(const DescriptorMemory& memory, uint64_t seed);

  // Per-sample four-stage descriptors -> aligned per-stage labels -> vote.
  std::vector<int> voted_labels(const std::vector<std::array<Vec, 4>>& descriptors) const;

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  ClusterBankConfig cfg_;
  std::array<ClusterModel, 4> models_;
  std::array<std::vector<int>, 4> perms_;  // cluster index remap per stage
};

}  // namespace pdat::csda

#endif
