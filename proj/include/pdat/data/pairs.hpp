#ifndef PDAT_DATA_PAIRS_HPP
#define PDAT_DATA_PAIRS_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pdat/data/dataset.hpp"
#include "pdat/data/segmenter.hpp"

namespace pdat::data {

struct AugmentConfig {
  int template_size = 64;      // T; search is 2T
  int search_size = 128;       // S
  double context_factor = 2.0; // template crop side = factor * max(w, h)
  double jitter_px = 16.0;     // max |translation| of the search crop, in search pixels
  double scale_jitter = 0.25;  // scale drawn from [1/(1+s), 1+s]
};

// One template/search training unit. Target boxes are pseudo boxes: they
// position the crop, they never feed the tracking loss.
struct DomainSample {
  std::string id;
  Image template_patch;
  Image search_patch;
  std::optional<Box> box;  // (x,y,w,h) in search-patch pixels
  Domain domain = Domain::source;
};

// Crops a centered template and a jittered search patch around the
// candidate box. Out-of-frame taps pad with the frame mean. Deterministic
// in (frame, candidate, aug, rng_seed).
DomainSample make_pair(const Image& frame, const SegmentCandidate& candidate,
                       const AugmentConfig& aug, uint64_t rng_seed, Domain domain);

struct PairStats {
  long long frames_scanned = 0;
  long long candidates_kept = 0;
};

// Labeled pairs, one per sampled frame, from ground-truth boxes.
std::vector<DomainSample> build_labeled_pairs(const std::vector<Sequence>& seqs,
                                              const AugmentConfig& aug, int stride, uint64_t seed,
                                              Domain domain);

inline std::vector<DomainSample> build_source_pairs(const std::vector<Sequence>& seqs,
                                                    const AugmentConfig& aug, int stride,
                                                    uint64_t seed) {
  return build_labeled_pairs(seqs, aug, stride, seed, Domain::source);
}

// Per-sequence segmenter lookup (offline masks live under each sequence).
using SegmenterProvider = std::function<std::shared_ptr<const Segmenter>(const Sequence&)>;

// Pseudo-labeled pairs from segmenter candidates on keyframes.
std::vector<DomainSample> build_target_pairs(const std::vector<Sequence>& seqs,
                                             const SegmenterProvider& provider,
                                             double conf_threshold, const CandidateFilter& filter,
                                             const AugmentConfig& aug, int stride, uint64_t seed,
                                             int max_candidates_per_frame, PairStats* stats);

std::vector<DomainSample> build_target_pairs(const std::vector<Sequence>& seqs,
                                             const Segmenter& segmenter, double conf_threshold,
                                             const CandidateFilter& filter,
                                             const AugmentConfig& aug, int stride, uint64_t seed,
                                             int max_candidates_per_frame, PairStats* stats);

// Preprocess output: crops as PNGs plus pairs.jsonl and manifest.json.
void write_pairs_dir(const std::string& dir, const std::vector<DomainSample>& samples,
                     const PairStats& stats, double conf_threshold);
std::vector<DomainSample> load_pairs_dir(const std::string& dir);

}  // namespace pdat::data

#endif
