#include "pdat/pipeline.hpp"

#include <filesystem>

#include "pdat/core/common.hpp"
#include "pdat/core/rng.hpp"
#include "pdat/csda/descriptor.hpp"
#include "pdat/nn/serialize.hpp"
#include "pdat/train/trainer.hpp"

namespace fs = std::filesystem;

namespace pdat {

data::AugmentConfig augment_from(const Config& cfg) {
  data::AugmentConfig aug;
  aug.template_size = cfg.get_int("data.template_size");
  aug.search_size = cfg.get_int("data.search_size");
  aug.context_factor = cfg.get_double("data.context_factor");
  aug.jitter_px = cfg.get_double("data.jitter_px");
  aug.scale_jitter = cfg.get_double("data.scale_jitter");
  return aug;
}

data::CandidateFilter filter_from(const Config& cfg) {
  data::CandidateFilter filter;
  filter.min_area = cfg.get_double("data.min_area");
  filter.max_rel_area = cfg.get_double("data.max_rel_area");
  return filter;
}

data::SegmenterProvider segmenter_provider_from(const Config& cfg,
                                                const std::string& dataset_root) {
  std::string kind = cfg.get_str("data.segmenter");
  if (kind == "stub") {
    auto seg = std::make_shared<data::ThresholdSegmenter>(cfg.get_int("data.seg_threshold"));
    return [seg](const data::Sequence&) -> std::shared_ptr<const data::Segmenter> {
      return seg;
    };
  }
  if (kind == "offline") {
    std::string root = dataset_root;
    return [root](const data::Sequence& seq) -> std::shared_ptr<const data::Segmenter> {
      return std::make_shared<data::OfflineMaskSegmenter>(
          (fs::path(root) / seq.id / "masks").string());
    };
  }
  throw ConfigError("data.segmenter must be 'stub' or 'offline', got '" + kind + "'");
}

std::vector<data::DomainSample> load_source_pairs(const Config& cfg) {
  std::string dir = cfg.get_str("data.source_dir");
  if (dir.empty()) throw ConfigError("data.source_dir is not set");
  auto seqs = data::load_dataset(dir, data::Domain::source);
  return data::build_labeled_pairs(seqs, augment_from(cfg), cfg.get_int("data.source_stride"),
                                   derive_seed(cfg.seed(), "source_pairs"),
                                   data::Domain::source);
}

std::vector<data::DomainSample> load_target_pairs(const Config& cfg, data::PairStats* stats) {
  std::string pairs_dir = cfg.get_str("data.target_pairs_dir");
  if (!pairs_dir.empty()) return data::load_pairs_dir(pairs_dir);
  std::string dir = cfg.get_str("data.target_dir");
  if (dir.empty()) throw ConfigError("data.target_dir is not set");
  auto seqs = data::load_dataset(dir, data::Domain::target);
  return data::build_target_pairs(seqs, segmenter_provider_from(cfg, dir),
                                  cfg.get_double("data.conf_threshold"), filter_from(cfg),
                                  augment_from(cfg), cfg.get_int("data.target_stride"),
                                  derive_seed(cfg.seed(), "target_pairs"),
                                  cfg.get_int("data.max_candidates"), stats);
}

track::TrackerModel load_model(const Config& cfg, const std::string& checkpoint_dir) {
  train::TrainerConfig tcfg = train::trainer_config_from(cfg);
  track::TrackerModel model(tcfg.tracker, tcfg.seed);
  nn::load_params((fs::path(checkpoint_dir) / "params.bin").string(), model.params());
  return model;
}

std::vector<std::array<csda::Vec, 4>> all_stage_descriptors(
    const track::TrackerModel& model, const std::vector<data::DomainSample>& samples,
    int max_count) {
  nn::NoGradGuard no_grad;
  int channels = model.config().backbone.in_channels;
  size_t limit = std::min(samples.size(), static_cast<size_t>(max_count));
  std::vector<std::array<csda::Vec, 4>> out(limit);
  const size_t chunk = 8;
  for (size_t base = 0; base < limit; base += chunk) {
    size_t n = std::min(chunk, limit - base);
    std::vector<nn::Tensor> z_batch, x_batch;
    for (size_t i = 0; i < n; ++i) {
      z_batch.push_back(track::patch_tensor(samples[base + i].template_patch, channels));
      x_batch.push_back(track::patch_tensor(samples[base + i].search_patch, channels));
    }
    auto zp = model.pyramid(track::stack_patches(z_batch), track::PatchKind::template_z);
    auto xp = model.pyramid(track::stack_patches(x_batch), track::PatchKind::search_x);
    for (int m = 0; m < 4; ++m) {
      csda::DescriptorBatch db = csda::correlation_descriptor(zp.stages[static_cast<size_t>(m)],
                                                              xp.stages[static_cast<size_t>(m)]);
      int dim = db.rows.shape()[1];
      for (size_t i = 0; i < n; ++i) {
        csda::Vec v(static_cast<size_t>(dim));
        for (int j = 0; j < dim; ++j)
          v[static_cast<size_t>(j)] = db.rows.val().at(static_cast<int>(i), j);
        out[base + i][static_cast<size_t>(m)] = std::move(v);
      }
    }
  }
  return out;
}

}  // namespace pdat
