#ifndef PDAT_AGDA_DISCRIMINATOR_HPP
#define PDAT_AGDA_DISCRIMINATOR_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "pdat/nn/layers.hpp"

namespace pdat::agda {

// Domain labels: source = 0, target = 1.
constexpr double kSourceLabel = 0.0;
constexpr double kTargetLabel = 1.0;

struct DiscriminatorConfig {
  int d_model = 64;
  int n_heads = 4;
  int ff_dim = 128;
};

// Reversal layer, token projection, two transformer encoder layers, mean
// pooling, linear readout -> one style score per sample. No positional
// encoding: style is a global statistic, so token order must not matter.
class StyleDiscriminator {
 public:
  StyleDiscriminator() = default;
  StyleDiscriminator(nn::ParamStore& store, const std::string& name, int in_channels,
                     const DiscriminatorConfig& cfg, std::mt19937_64& rng);

  // feat: (N,C,H,W); returns (N) scores. grl_coef scales the reversed
  // gradient on the way back into the feature extractor.
  nn::Var discriminate(const nn::Var& feat, double grl_coef) const;

 private:
  nn::LinearLayer proj_, readout_;
  nn::TransformerEncoderLayer enc1_, enc2_;
};

struct AgdaConfig {
  std::vector<int> stages = {3, 4};  // backbone stages carrying a discriminator
  DiscriminatorConfig disc;
  double grl_coefficient = 1.0;
  double grl_warmup = 0.1;  // fraction of max_iter for linear warm-up
  double loss_weight = 1.0;
};

// One independent discriminator per adapted stage (channel widths differ,
// so there is nothing to share).
class AgdaModule {
 public:
  AgdaModule(const AgdaConfig& cfg, const std::vector<int>& stage_widths, uint64_t seed);

  const AgdaConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }

  size_t num_stages() const { return discs_.size(); }
  int stage_at(size_t k) const { return cfg_.stages[k]; }

  nn::Var score_stage(size_t k, const nn::Var& feat, double grl_coef) const {
    return discs_[k].discriminate(feat, grl_coef);
  }

  // Constant coefficient with optional linear warm-up over the first
  // grl_warmup fraction of the run.
  double grl_coef_at(long long iter, long long max_iter) const;

 private:
  AgdaConfig cfg_;
  nn::ParamStore params_;
  std::vector<StyleDiscriminator> discs_;
};

// Eq-style least-squares adversarial losses over per-sample score vectors.
// Generator: target-domain scores pulled toward the source label.
nn::Var adv_loss_G(const nn::Var& d_xt, const nn::Var& d_zt);
// Discriminator: both domains toward their own labels. Both domains must be
// present (non-empty score vectors).
nn::Var adv_loss_D(const nn::Var& d_xs, const nn::Var& d_zs, const nn::Var& d_xt,
                   const nn::Var& d_zt);

}  // namespace pdat::agda

#endif
