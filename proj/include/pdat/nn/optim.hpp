#ifndef PDAT_NN_OPTIM_HPP
#define PDAT_NN_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "pdat/nn/autograd.hpp"

namespace pdat::nn {

// Adam over a fixed parameter list. The learning rate is supplied per step
// so schedules live with the trainer, not here.
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::vector<NodePtr> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.push_back(Tensor::zeros(p->value.shape()));
      v_.push_back(Tensor::zeros(p->value.shape()));
    }
  }

  void step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Node& p = *params_[i];
      if (!p.grad_allocated()) continue;
      for (long long j = 0; j < p.value.size(); ++j) {
        double g = p.grad[j];
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
        double mhat = m_[i][j] / bc1;
        double vhat = v_[i][j] / bc2;
        p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  int64_t step_count() const { return t_; }

  // Exposed for checkpointing.
  std::vector<Tensor>& m() { return m_; }
  std::vector<Tensor>& v() { return v_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  std::vector<NodePtr> params_;
  std::vector<Tensor> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
};

}  // namespace pdat::nn

#endif
