#ifndef PDAT_NN_LAYERS_HPP
#define PDAT_NN_LAYERS_HPP

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pdat/nn/ops.hpp"

namespace pdat::nn {

// Ordered registry of trainable leaves. Layer constructors register their
// parameters here; the optimizer and the checkpoint writer walk the same
// list, so ordering is stable across runs.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init) {
    Var v = Var::leaf(std::move(init), true);
    items_.emplace_back(name, v);
    return v;
  }

  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }

  std::vector<NodePtr> nodes() const {
    std::vector<NodePtr> out;
    out.reserve(items_.size());
    for (const auto& [name, v] : items_) out.push_back(v.node());
    return out;
  }

  Var* find(const std::string& name) {
    for (auto& [n, v] : items_)
      if (n == name) return &v;
    return nullptr;
  }

  void zero_grad() {
    for (auto& [n, v] : items_) v.node()->zero_grad();
  }

  void set_requires_grad(bool on) {
    for (auto& [n, v] : items_) v.node()->requires_grad = on;
  }

  long long total_size() const {
    long long s = 0;
    for (const auto& [n, v] : items_) s += v.val().size();
    return s;
  }

 private:
  std::vector<std::pair<std::string, Var>> items_;
};

Tensor he_normal(std::vector<int> shape, int fan_in, std::mt19937_64& rng);
Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, std::mt19937_64& rng);

class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(ParamStore& store, const std::string& name, int cin, int cout,
              int kernel, int stride, int pad, std::mt19937_64& rng);
  Var forward(const Var& x) const { return conv2d(x, w_, b_, stride_, pad_); }

 private:
  Var w_, b_;
  int stride_ = 1, pad_ = 0;
};

class InstanceNorm2dLayer {
 public:
  InstanceNorm2dLayer() = default;
  InstanceNorm2dLayer(ParamStore& store, const std::string& name, int channels);
  Var forward(const Var& x) const { return instance_norm(x, gamma_, beta_); }

 private:
  Var gamma_, beta_;
};

class LinearLayer {
 public:
  LinearLayer() = default;
  // init_scale < 1 shrinks the initial weights (score heads start near 0).
  LinearLayer(ParamStore& store, const std::string& name, int in, int out,
              std::mt19937_64& rng, double init_scale = 1.0);
  Var forward(const Var& x) const { return linear(x, w_, b_); }

 private:
  Var w_, b_;
};

class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  LayerNormLayer(ParamStore& store, const std::string& name, int dim);
  Var forward(const Var& x) const { return layer_norm_rows(x, gamma_, beta_); }

 private:
  Var gamma_, beta_;
};

// Post-norm encoder layer over a (tokens, d_model) matrix. No positional
// encoding anywhere in this project: token order carries no information.
class TransformerEncoderLayer {
 public:
  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(ParamStore& store, const std::string& name, int d_model,
                          int n_heads, int ff_dim, std::mt19937_64& rng);
  Var forward(const Var& tokens) const;

 private:
  LinearLayer q_, k_, v_, o_, ff1_, ff2_;
  LayerNormLayer ln1_, ln2_;
  int d_model_ = 0, n_heads_ = 0;
};

}  // namespace pdat::nn

#endif
