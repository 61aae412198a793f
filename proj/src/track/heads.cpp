#include "pdat/track/heads.hpp"

#include <stdexcept>

namespace pdat::track {

SiamHead::SiamHead(nn::ParamStore& store, const HeadConfig& cfg, std::mt19937_64& rng)
    : reg_scale_(cfg.reg_scale) {
  trunk_ = nn::Conv2dLayer(store, "head.trunk", cfg.in_channels, cfg.width, 3, 1, 1, rng);
  trunk_norm_ = nn::InstanceNorm2dLayer(store, "head.trunk_norm", cfg.width);
  cls_ = nn::Conv2dLayer(store, "head.cls", cfg.width, 1, 1, 1, 0, rng);
  reg_ = nn::Conv2dLayer(store, "head.reg", cfg.width, 4, 1, 1, 0, rng);
  cen_ = nn::Conv2dLayer(store, "head.cen", cfg.width, 1, 1, 1, 0, rng);
}

HeadOutput SiamHead::forward_heads(const nn::Var& response) const {
  if (response.shape().size() != 4 || response.val().empty())
    throw std::invalid_argument("forward_heads: empty response");
  nn::Var trunk = nn::relu(trunk_norm_.forward(trunk_.forward(response)));
  HeadOutput out;
  out.cls = cls_.forward(trunk);
  out.cen = cen_.forward(trunk);
  out.reg = nn::mul_scalar(nn::softplus(reg_.forward(trunk)), reg_scale_);
  return out;
}

}  // namespace pdat::track
