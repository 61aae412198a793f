#include "pdat/agda/discriminator.hpp"

#include <stdexcept>

#include "pdat/core/rng.hpp"

namespace pdat::agda {

StyleDiscriminator::StyleDiscriminator(nn::ParamStore& store, const std::string& name,
                                       int in_channels, const DiscriminatorConfig& cfg,
                                       std::mt19937_64& rng) {
  proj_ = nn::LinearLayer(store, name + ".proj", in_channels, cfg.d_model, rng);
  enc1_ = nn::TransformerEncoderLayer(store, name + ".enc1", cfg.d_model, cfg.n_heads,
                                      cfg.ff_dim, rng);
  enc2_ = nn::TransformerEncoderLayer(store, name + ".enc2", cfg.d_model, cfg.n_heads,
                                      cfg.ff_dim, rng);
  // small-scale readout keeps initial scores near zero; large initial
  // least-squares targets destabilize the first discriminator steps
  readout_ = nn::LinearLayer(store, name + ".readout", cfg.d_model, 1, rng, 0.1);
}

nn::Var StyleDiscriminator::discriminate(const nn::Var& feat, double grl_coef) const {
  const auto& shape = feat.shape();
  if (shape.size() != 4) throw std::invalid_argument("discriminate: need (N,C,H,W) features");
  int n = shape[0];
  nn::Var reversed = nn::grad_reverse(feat, grl_coef);
  std::vector<nn::Var> scores;
  scores.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    nn::Var tokens = nn::sample_tokens(reversed, i);
    nn::Var h = proj_.forward(tokens);
    h = enc1_.forward(h);
    h = enc2_.forward(h);
    nn::Var pooled = nn::reshape(nn::mean_rows(h), {1, h.shape()[1]});
    scores.push_back(nn::reshape(readout_.forward(pooled), {1}));
  }
  return nn::stack_scalars(scores);
}

AgdaModule::AgdaModule(const AgdaConfig& cfg, const std::vector<int>& stage_widths, uint64_t seed)
    : cfg_(cfg) {
  if (stage_widths.size() != 4) throw std::invalid_argument("AgdaModule: need 4 stage widths");
  auto rng = make_rng(seed, "agda_init");
  for (int stage : cfg_.stages) {
    if (stage < 1 || stage > 4) throw std::invalid_argument("AgdaModule: stage out of range");
    discs_.emplace_back(params_, "agda.stage" + std::to_string(stage),
                        stage_widths[static_cast<size_t>(stage - 1)], cfg_.disc, rng);
  }
}

double AgdaModule::grl_coef_at(long long iter, long long max_iter) const {
  double coef = cfg_.grl_coefficient;
  if (cfg_.grl_warmup > 0 && max_iter > 0) {
    auto ramp = static_cast<long long>(cfg_.grl_warmup * static_cast<double>(max_iter));
    if (ramp > 0 && iter < ramp)
      coef *= static_cast<double>(iter) / static_cast<double>(ramp);
  }
  return coef;
}

nn::Var adv_loss_G(const nn::Var& d_xt, const nn::Var& d_zt) {
  using namespace nn;
  Var x_term = mean_all(square(add_scalar(d_xt, -kSourceLabel)));
  Var z_term = mean_all(square(add_scalar(d_zt, -kSourceLabel)));
  return add(x_term, z_term);
}

nn::Var adv_loss_D(const nn::Var& d_xs, const nn::Var& d_zs, const nn::Var& d_xt,
                   const nn::Var& d_zt) {
  using namespace nn;
  if (d_xs.val().empty() || d_zs.val().empty() || d_xt.val().empty() || d_zt.val().empty())
    throw std::invalid_argument("adv_loss_D: both domains must be present");
  Var src = add(mean_all(square(add_scalar(d_xs, -kSourceLabel))),
                mean_all(square(add_scalar(d_zs, -kSourceLabel))));
  Var tgt = add(mean_all(square(add_scalar(d_xt, -kTargetLabel))),
                mean_all(square(add_scalar(d_zt, -kTargetLabel))));
  return add(src, tgt);
}

}  // namespace pdat::agda
