#ifndef PDAT_TRACK_BACKBONE_HPP
#define PDAT_TRACK_BACKBONE_HPP

#include <array>
#include <random>
#include <vector>

#include "pdat/nn/layers.hpp"

namespace pdat::track {

enum class PatchKind { template_z, search_x };

// Per-stage feature maps; spatial side halves at every stage.
struct FeaturePyramid {
  std::vector<nn::Var> stages;  // 4 entries, (N, C_m, H_m, W_m)
  PatchKind kind = PatchKind::search_x;
};

struct BackboneConfig {
  int in_channels = 1;
  std::vector<int> widths = {16, 32, 64, 128};
};

// Four stages, each a stride-2 entry conv plus a stride-1 conv, both 3x3
// with instance norm and ReLU. Pluggable-depth stand-in for a production
// backbone: only the 4-stage halving contract matters downstream.
class Backbone {
 public:
  Backbone() = default;
  Backbone(nn::ParamStore& store, const BackboneConfig& cfg, std::mt19937_64& rng);

  // patch side must be divisible by 16
  FeaturePyramid extract_pyramid(const nn::Var& x, PatchKind kind) const;

  const BackboneConfig& config() const { return cfg_; }

 private:
  struct Stage {
    nn::Conv2dLayer conv1, conv2;
    nn::InstanceNorm2dLayer norm1, norm2;
  };
  std::array<Stage, 4> stages_;
  BackboneConfig cfg_;
};

}  // namespace pdat::track

#endif
