#include "pdat/nn/autograd.hpp"

#include <unordered_set>

namespace pdat::nn {

void backward(const Var& root) {
  if (!root.defined()) throw std::logic_error("backward: undefined root");
  if (root.val().size() != 1) throw std::logic_error("backward: root must be scalar");
  if (!root.requires_grad()) return;

  // Reverse post-order DFS gives a topological order with every consumer
  // ahead of its inputs.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      Node* p = f.n->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad();
  root.node()->grad.fill(1.0);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

}  // namespace pdat::nn
