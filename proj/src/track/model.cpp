#include "pdat/track/model.hpp"

#include <stdexcept>

#include "pdat/core/imgproc.hpp"
#include "pdat/core/rng.hpp"

namespace pdat::track {

TrackerModel::TrackerModel(const TrackerConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.head_stage < 1 || cfg.head_stage > 4)
    throw std::invalid_argument("TrackerModel: head_stage must be 1..4");
  auto rng = make_rng(seed, "tracker_init");
  backbone_ = Backbone(params_, cfg.backbone, rng);
  HeadConfig hc;
  hc.in_channels = cfg.backbone.widths[static_cast<size_t>(cfg.head_stage - 1)];
  hc.width = cfg.head_width;
  hc.reg_scale = cfg.reg_scale;
  head_ = SiamHead(params_, hc, rng);
}

HeadOutput TrackerModel::forward(const FeaturePyramid& z, const FeaturePyramid& x) const {
  const nn::Var& zf = z.stages[static_cast<size_t>(cfg_.head_stage - 1)];
  const nn::Var& xf = x.stages[static_cast<size_t>(cfg_.head_stage - 1)];
  nn::Var response = nn::depthwise_xcorr(zf, xf);
  return head_.forward_heads(response);
}

ResponseGeometry TrackerModel::geometry() const {
  ResponseGeometry g;
  g.stride = 1 << cfg_.head_stage;
  g.z_feat = cfg_.template_size / g.stride;
  int x_feat = cfg_.search_size / g.stride;
  g.response_side = x_feat - g.z_feat + 1;
  g.offset = static_cast<double>(g.stride) * g.z_feat / 2.0;
  return g;
}

nn::Tensor patch_tensor(const Image& img, int channels) {
  if (img.channels == channels) return image_to_tensor(img);
  if (channels == 1) return image_to_tensor(to_gray(img));
  if (channels == 3 && img.channels == 1) {
    nn::Tensor one = image_to_tensor(img);
    nn::Tensor out({3, img.height, img.width});
    long long plane = static_cast<long long>(img.height) * img.width;
    for (int c = 0; c < 3; ++c)
      for (long long i = 0; i < plane; ++i) out[c * plane + i] = one[i];
    return out;
  }
  throw std::invalid_argument("patch_tensor: unsupported channel conversion");
}

nn::Var stack_patches(const std::vector<nn::Tensor>& patches) {
  if (patches.empty()) throw std::invalid_argument("stack_patches: empty batch");
  const auto& s = patches[0].shape();
  nn::Tensor out({static_cast<int>(patches.size()), s[0], s[1], s[2]});
  long long per = patches[0].size();
  for (size_t n = 0; n < patches.size(); ++n) {
    if (patches[n].shape() != s) throw std::invalid_argument("stack_patches: shape mismatch");
    for (long long i = 0; i < per; ++i) out[static_cast<long long>(n) * per + i] = patches[n][i];
  }
  return nn::Var::leaf(std::move(out), false);
}

}  // namespace pdat::track
