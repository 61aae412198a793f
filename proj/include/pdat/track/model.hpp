#ifndef PDAT_TRACK_MODEL_HPP
#define PDAT_TRACK_MODEL_HPP

#include <cstdint>
#include <vector>

#include "pdat/core/image.hpp"
#include "pdat/track/backbone.hpp"
#include "pdat/track/heads.hpp"

namespace pdat::track {

struct TrackerConfig {
  BackboneConfig backbone;
  int head_stage = 3;  // stage whose correlation feeds the heads (1..4)
  int head_width = 64;
  double reg_scale = 8.0;
  double lambda_cls = 1.0, lambda_reg = 3.0, lambda_cen = 1.0;
  double window_weight = 0.3;
  int template_size = 64;
  int search_size = 128;
  double context_factor = 2.0;
};

// Maps response-grid cells to search-patch pixel centers. Cell (i,j) sits
// where the template center lands when its top-left aligns with feature
// cell (i,j) of the search map.
struct ResponseGeometry {
  int stride = 8;
  int z_feat = 8;
  int response_side = 9;
  double offset = 32.0;
  double cell_center(int j) const { return offset + static_cast<double>(stride) * j; }
};

// Baseline Siamese tracker: shared backbone, depthwise correlation at the
// head stage, classification/regression/centerness branches.
class TrackerModel {
 public:
  TrackerModel(const TrackerConfig& cfg, uint64_t seed);

  const TrackerConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const Backbone& backbone() const { return backbone_; }

  FeaturePyramid pyramid(const nn::Var& batch, PatchKind kind) const {
    return backbone_.extract_pyramid(batch, kind);
  }

  // Correlation of the head-stage features, then the heads.
  HeadOutput forward(const FeaturePyramid& z, const FeaturePyramid& x) const;

  ResponseGeometry geometry() const;

 private:
  TrackerConfig cfg_;
  nn::ParamStore params_;
  Backbone backbone_;
  SiamHead head_;
};

// Converts an image to the model's channel count: replicate gray to 3 or
// collapse color by luma, then scale to [0,1], (C,H,W).
nn::Tensor patch_tensor(const Image& img, int channels);

// Stacks per-sample (C,H,W) tensors into one (N,C,H,W) leaf.
nn::Var stack_patches(const std::vector<nn::Tensor>& patches);

}  // namespace pdat::track

#endif
