#include "pdat/track/backbone.hpp"

#include <stdexcept>

namespace pdat::track {

Backbone::Backbone(nn::ParamStore& store, const BackboneConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  if (cfg.widths.size() != 4) throw std::invalid_argument("Backbone: need 4 stage widths");
  int cin = cfg.in_channels;
  for (int m = 0; m < 4; ++m) {
    int cout = cfg.widths[static_cast<size_t>(m)];
    std::string base = "backbone.stage" + std::to_string(m + 1);
    stages_[static_cast<size_t>(m)].conv1 =
        nn::Conv2dLayer(store, base + ".conv1", cin, cout, 3, 2, 1, rng);
    stages_[static_cast<size_t>(m)].norm1 = nn::InstanceNorm2dLayer(store, base + ".norm1", cout);
    stages_[static_cast<size_t>(m)].conv2 =
        nn::Conv2dLayer(store, base + ".conv2", cout, cout, 3, 1, 1, rng);
    stages_[static_cast<size_t>(m)].norm2 = nn::InstanceNorm2dLayer(store, base + ".norm2", cout);
    cin = cout;
  }
}

FeaturePyramid Backbone::extract_pyramid(const nn::Var& x, PatchKind kind) const {
  const auto& shape = x.shape();
  if (shape.size() != 4) throw std::invalid_argument("extract_pyramid: need (N,C,H,W) input");
  if (shape[2] % 16 != 0 || shape[3] % 16 != 0)
    throw std::invalid_argument("extract_pyramid: patch side must be divisible by 16");
  if (shape[1] != cfg_.in_channels)
    throw std::invalid_argument("extract_pyramid: channel count mismatch");

  FeaturePyramid pyr;
  pyr.kind = kind;
  nn::Var cur = x;
  for (const auto& stage : stages_) {
    cur = nn::relu(stage.norm1.forward(stage.conv1.forward(cur)));
    cur = nn::relu(stage.norm2.forward(stage.conv2.forward(cur)));
    pyr.stages.push_back(cur);
  }
  return pyr;
}

}  // namespace pdat::track
