#ifndef PDAT_PIPELINE_HPP
#define PDAT_PIPELINE_HPP

#include <array>
#include <string>
#include <vector>

#include "pdat/core/config.hpp"
#include "pdat/csda/kmeans.hpp"
#include "pdat/data/batcher.hpp"
#include "pdat/track/model.hpp"

namespace pdat {

data::AugmentConfig augment_from(const Config& cfg);
data::CandidateFilter filter_from(const Config& cfg);

// Stub or per-sequence offline-mask segmenter, per data.segmenter.
data::SegmenterProvider segmenter_provider_from(const Config& cfg,
                                                const std::string& dataset_root);

// Labeled pairs from data.source_dir.
std::vector<data::DomainSample> load_source_pairs(const Config& cfg);

// Pseudo pairs: preprocessed directory when data.target_pairs_dir is set,
// otherwise segmenter candidates over data.target_dir keyframes.
std::vector<data::DomainSample> load_target_pairs(const Config& cfg,
                                                  data::PairStats* stats = nullptr);

// Model built from config with checkpoint weights.
track::TrackerModel load_model(const Config& cfg, const std::string& checkpoint_dir);

// Per-sample descriptors for all four stages (evaluation mode, batched).
std::vector<std::array<csda::Vec, 4>> all_stage_descriptors(
    const track::TrackerModel& model, const std::vector<data::DomainSample>& samples,
    int max_count);

}  // namespace pdat

#endif
