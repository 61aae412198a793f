#include "pdat/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace pdat::nn {

Tensor he_normal(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (long long i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (long long i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

Conv2dLayer::Conv2dLayer(ParamStore& store, const std::string& name, int cin, int cout,
                         int kernel, int stride, int pad, std::mt19937_64& rng)
    : stride_(stride), pad_(pad) {
  int fan_in = cin * kernel * kernel;
  w_ = store.add(name + ".w", he_normal({cout, cin, kernel, kernel}, fan_in, rng));
  b_ = store.add(name + ".b", Tensor::zeros({cout}));
}

InstanceNorm2dLayer::InstanceNorm2dLayer(ParamStore& store, const std::string& name,
                                         int channels) {
  gamma_ = store.add(name + ".gamma", Tensor::full({channels}, 1.0));
  beta_ = store.add(name + ".beta", Tensor::zeros({channels}));
}

LinearLayer::LinearLayer(ParamStore& store, const std::string& name, int in, int out,
                         std::mt19937_64& rng, double init_scale) {
  Tensor w = glorot_uniform({in, out}, in, out, rng);
  if (init_scale != 1.0)
    for (long long i = 0; i < w.size(); ++i) w[i] *= init_scale;
  w_ = store.add(name + ".w", std::move(w));
  b_ = store.add(name + ".b", Tensor::zeros({out}));
}

LayerNormLayer::LayerNormLayer(ParamStore& store, const std::string& name, int dim) {
  gamma_ = store.add(name + ".gamma", Tensor::full({dim}, 1.0));
  beta_ = store.add(name + ".beta", Tensor::zeros({dim}));
}

TransformerEncoderLayer::TransformerEncoderLayer(ParamStore& store, const std::string& name,
                                                 int d_model, int n_heads, int ff_dim,
                                                 std::mt19937_64& rng)
    : d_model_(d_model), n_heads_(n_heads) {
  if (d_model % n_heads != 0)
    throw std::invalid_argument("TransformerEncoderLayer: d_model % n_heads != 0");
  q_ = LinearLayer(store, name + ".q", d_model, d_model, rng);
  k_ = LinearLayer(store, name + ".k", d_model, d_model, rng);
  v_ = LinearLayer(store, name + ".v", d_model, d_model, rng);
  o_ = LinearLayer(store, name + ".o", d_model, d_model, rng);
  ff1_ = LinearLayer(store, name + ".ff1", d_model, ff_dim, rng);
  ff2_ = LinearLayer(store, name + ".ff2", ff_dim, d_model, rng);
  ln1_ = LayerNormLayer(store, name + ".ln1", d_model);
  ln2_ = LayerNormLayer(store, name + ".ln2", d_model);
}

Var TransformerEncoderLayer::forward(const Var& tokens) const {
  int dk = d_model_ / n_heads_;
  Var q = q_.forward(tokens);
  Var k = k_.forward(tokens);
  Var v = v_.forward(tokens);
  std::vector<Var> heads;
  heads.reserve(static_cast<size_t>(n_heads_));
  double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  for (int h = 0; h < n_heads_; ++h) {
    Var qh = slice_cols(q, h * dk, (h + 1) * dk);
    Var kh = slice_cols(k, h * dk, (h + 1) * dk);
    Var vh = slice_cols(v, h * dk, (h + 1) * dk);
    Var attn = softmax_rows(mul_scalar(matmul(qh, transpose(kh)), scale));
    heads.push_back(matmul(attn, vh));
  }
  Var mhsa = o_.forward(concat_cols(heads));
  Var x = ln1_.forward(add(tokens, mhsa));
  Var ff = ff2_.forward(relu(ff1_.forward(x)));
  return ln2_.forward(add(x, ff));
}

}  // namespace pdat::nn
