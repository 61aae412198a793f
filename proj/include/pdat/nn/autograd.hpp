#ifndef PDAT_NN_AUTOGRAD_HPP
#define PDAT_NN_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "pdat/nn/tensor.hpp"

namespace pdat::nn {

class Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the reverse-mode graph. Interior nodes hold a closure that
// scatters this node's gradient into its parents; leaves just receive it.
class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated lazily by backward()
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  bool grad_allocated() const { return grad.size() == value.size() && !value.empty(); }

  void ensure_grad() {
    if (!grad_allocated()) grad = Tensor::zeros(value.shape());
  }

  void zero_grad() {
    if (grad_allocated()) grad.fill(0.0);
  }
};

// Handle to a graph node. Cheap to copy; the graph is freed when the last
// handle to its root goes away (parameters persist as leaves).
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  static Var leaf(Tensor value, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  bool defined() const { return n_ != nullptr; }
  const Tensor& val() const { return n_->value; }
  Tensor& val() { return n_->value; }
  Tensor& grad() { return n_->grad; }
  const Tensor& grad() const { return n_->grad; }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  NodePtr node() const { return n_; }

  const std::vector<int>& shape() const { return n_->value.shape(); }
  double item() const { return n_->value.item(); }

 private:
  NodePtr n_;
};

// Thread-local switch mirroring the usual eval/no-grad idiom: while off,
// ops compute values but record no graph.
struct GradMode {
  static bool& enabled() {
    thread_local bool on = true;
    return on;
  }
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::enabled() = false; }
  ~NoGradGuard() { GradMode::enabled() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Builds an interior node. Parents that do not require grad are still kept
// (backward_fn may read their values); requires_grad propagates.
inline Var make_op(Tensor value, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (GradMode::enabled()) {
    for (const auto& p : parents)
      if (p->requires_grad) {
        n->requires_grad = true;
        break;
      }
    if (n->requires_grad) {
      n->parents = std::move(parents);
      n->backward_fn = std::move(backward_fn);
    }
  }
  return Var(std::move(n));
}

// Reverse-mode sweep from a scalar root. Gradients accumulate into every
// reachable node that requires grad; leaf grads persist until zeroed.
void backward(const Var& root);

// Value copy with the graph cut.
inline Var detach(const Var& v) { return Var::leaf(v.val(), false); }

}  // namespace pdat::nn

#endif
