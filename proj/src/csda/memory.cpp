#include "pdat/csda/memory.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "pdat/core/rng.hpp"

namespace pdat::csda {

namespace {

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("csda state: truncated stream");
  return v;
}
void write_vec(std::ostream& os, const Vec& v) {
  write_u32(os, static_cast<uint32_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}
Vec read_vec(std::istream& is) {
  Vec v(read_u32(is));
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw std::runtime_error("csda state: truncated vector");
  return v;
}
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_str(std::istream& is) {
  std::string s(read_u32(is), '\0');
  is.read(s.data(), static_cast<std::streamsize>(s.size()));
  if (!is) throw std::runtime_error("csda state: truncated string");
  return s;
}

}  // namespace

void DescriptorMemory::push(MemoryEntry entry) {
  auto& dq = entry.domain == data::Domain::source ? source_ : target_;
  dq.push_back(std::move(entry));
  while (static_cast<int>(dq.size()) > capacity_) dq.pop_front();
}

int DescriptorMemory::size(data::Domain d) const {
  return static_cast<int>((d == data::Domain::source ? source_ : target_).size());
}

void DescriptorMemory::save(std::ostream& os) const {
  for (const auto* dq : {&source_, &target_}) {
    write_u32(os, static_cast<uint32_t>(dq->size()));
    for (const auto& e : *dq) {
      write_str(os, e.sample_id);
      write_u32(os, e.domain == data::Domain::source ? 0u : 1u);
      for (const auto& d : e.desc) write_vec(os, d);
    }
  }
}

void DescriptorMemory::load(std::istream& is) {
  for (auto* dq : {&source_, &target_}) {
    dq->clear();
    uint32_t n = read_u32(is);
    for (uint32_t i = 0; i < n; ++i) {
      MemoryEntry e;
      e.sample_id = read_str(is);
      e.domain = read_u32(is) == 0 ? data::Domain::source : data::Domain::target;
      for (auto& d : e.desc) d = read_vec(is);
      dq->push_back(std::move(e));
    }
  }
}

RefitLog ClusterBank::refit(const DescriptorMemory& memory, uint64_t seed) {
  // pool both domains jointly, source entries first (deterministic order)
  std::vector<const MemoryEntry*> pool;
  for (const auto& e : memory.entries(data::Domain::source)) pool.push_back(&e);
  for (const auto& e : memory.entries(data::Domain::target)) pool.push_back(&e);
  if (pool.size() < 2) throw std::runtime_error("ClusterBank::refit: need at least 2 descriptors");

  std::array<std::vector<Vec>, 4> stage_vecs;
  for (int m = 0; m < 4; ++m) {
    stage_vecs[static_cast<size_t>(m)].reserve(pool.size());
    for (const auto* e : pool) stage_vecs[static_cast<size_t>(m)].push_back(e->desc[static_cast<size_t>(m)]);
  }

  RefitLog log;

  // alignment stage picks C by silhouette over the configured range
  models_[3] = fit_clusters(stage_vecs[3], cfg_.c_min, cfg_.c_max,
                            derive_seed(seed, "stage4"), cfg_.kmeans, 4);
  int c = models_[3].num_clusters;
  log.selected_c = c;
  log.fallback = models_[3].fallback;
  log.zero_variance = models_[3].zero_variance;
  log.silhouettes[3] = models_[3].silhouette;

  std::vector<int> labels4 = assign_labels(models_[3], stage_vecs[3]);
  perms_[3].resize(static_cast<size_t>(c));
  for (int i = 0; i < c; ++i) perms_[3][static_cast<size_t>(i)] = i;

  for (int m = 0; m < 3; ++m) {
    models_[static_cast<size_t>(m)] = fit_kmeans(
        stage_vecs[static_cast<size_t>(m)], c,
        derive_seed(seed, "stage" + std::to_string(m + 1)), cfg_.kmeans);
    models_[static_cast<size_t>(m)].stage = m + 1;
    std::vector<int> labels_m =
        assign_labels(models_[static_cast<size_t>(m)], stage_vecs[static_cast<size_t>(m)]);
    models_[static_cast<size_t>(m)].silhouette =
        mean_silhouette(stage_vecs[static_cast<size_t>(m)], labels_m, c);
    log.silhouettes[static_cast<size_t>(m)] = models_[static_cast<size_t>(m)].silhouette;
    perms_[static_cast<size_t>(m)] = align_stage_labels(labels4, labels_m, c).permutation;
  }

  // voted-label histograms over the memory, per domain
  log.histogram_source.assign(static_cast<size_t>(c), 0);
  log.histogram_target.assign(static_cast<size_t>(c), 0);
  std::vector<std::array<Vec, 4>> descs;
  descs.reserve(pool.size());
  for (const auto* e : pool) descs.push_back(e->desc);
  std::vector<int> voted = voted_labels(descs);
  for (size_t i = 0; i < pool.size(); ++i) {
    auto& hist = pool[i]->domain == data::Domain::source ? log.histogram_source
                                                         : log.histogram_target;
    ++hist[static_cast<size_t>(voted[i])];
  }
  return log;
}

std::vector<int> ClusterBank::voted_labels(
    const std::vector<std::array<Vec, 4>>& descriptors) const {
  if (!ready()) throw std::runtime_error("ClusterBank: vote before first refit");
  std::vector<int> out;
  out.reserve(descriptors.size());
  for (const auto& d : descriptors) {
    std::vector<int> stage_labels(4);
    for (int m = 0; m < 4; ++m) {
      int raw = assign_labels(models_[static_cast<size_t>(m)], {d[static_cast<size_t>(m)]})[0];
      stage_labels[static_cast<size_t>(m)] = perms_[static_cast<size_t>(m)][static_cast<size_t>(raw)];
    }
    out.push_back(vote_label(stage_labels, cfg_.vote_weights));
  }
  return out;
}

void ClusterBank::save(std::ostream& os) const {
  for (int m = 0; m < 4; ++m) {
    const auto& model = models_[static_cast<size_t>(m)];
    write_u32(os, static_cast<uint32_t>(model.num_clusters));
    write_u32(os, static_cast<uint32_t>(model.stage));
    os.write(reinterpret_cast<const char*>(&model.silhouette), sizeof(double));
    write_u32(os, model.fallback ? 1u : 0u);
    write_u32(os, model.zero_variance ? 1u : 0u);
    for (const auto& cvec : model.centroids) write_vec(os, cvec);
    write_u32(os, static_cast<uint32_t>(perms_[static_cast<size_t>(m)].size()));
    for (int p : perms_[static_cast<size_t>(m)]) write_u32(os, static_cast<uint32_t>(p));
  }
}

void ClusterBank::load(std::istream& is) {
  for (int m = 0; m < 4; ++m) {
    auto& model = models_[static_cast<size_t>(m)];
    model.num_clusters = static_cast<int>(read_u32(is));
    model.stage = static_cast<int>(read_u32(is));
    is.read(reinterpret_cast<char*>(&model.silhouette), sizeof(double));
    model.fallback = read_u32(is) != 0;
    model.zero_variance = read_u32(is) != 0;
    model.centroids.clear();
    for (int c = 0; c < model.num_clusters; ++c) model.centroids.push_back(read_vec(is));
    perms_[static_cast<size_t>(m)].clear();
    uint32_t np = read_u32(is);
    for (uint32_t p = 0; p < np; ++p)
      perms_[static_cast<size_t>(m)].push_back(static_cast<int>(read_u32(is)));
  }
}

}  // namespace pdat::csda
