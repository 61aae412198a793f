#ifndef PDAT_TRACK_HEADS_HPP
#define PDAT_TRACK_HEADS_HPP

#include <random>

#include "pdat/nn/layers.hpp"

namespace pdat::track {

// cls/cen are logit maps; reg holds strictly positive (l,t,r,b) distances
// in search-patch pixels.
struct HeadOutput {
  nn::Var cls;  // (N,1,h,w)
  nn::Var reg;  // (N,4,h,w)
  nn::Var cen;  // (N,1,h,w)
};

struct HeadConfig {
  int in_channels = 64;
  int width = 64;
  double reg_scale = 8.0;  // multiplies softplus output into pixel units
};

// Shared 3x3 trunk, then 1x1 branches for classification, regression and
// centerness over the correlation response.
class SiamHead {
 public:
  SiamHead() = default;
  SiamHead(nn::ParamStore& store, const HeadConfig& cfg, std::mt19937_64& rng);

  HeadOutput forward_heads(const nn::Var& response) const;

 private:
  nn::Conv2dLayer trunk_, cls_, reg_, cen_;
  nn::InstanceNorm2dLayer trunk_norm_;
  double reg_scale_ = 8.0;
};

}  // namespace pdat::track

#endif
