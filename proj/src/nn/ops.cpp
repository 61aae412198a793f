#include "pdat/nn/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace pdat::nn {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

std::atomic<int> g_op_threads{2};

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.val().same_shape(b.val()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.val().shape_str() + " vs " + b.val().shape_str());
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void set_op_threads(int n) { g_op_threads = std::max(1, n); }
int op_threads() { return g_op_threads.load(); }

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.val();
  const double* pb = b.val().data();
  for (long long i = 0; i < out.size(); ++i) out[i] += pb[i];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (long long i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (long long i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.val();
  const double* pb = b.val().data();
  for (long long i = 0; i < out.size(); ++i) out[i] -= pb[i];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (long long i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (long long i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.val();
  const double* pb = b.val().data();
  for (long long i = 0; i < out.size(); ++i) out[i] *= pb[i];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (long long i = 0; i < self.grad.size(); ++i)
        an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (long long i = 0; i < self.grad.size(); ++i)
        bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  Tensor out = a.val();
  const double* pb = b.val().data();
  for (long long i = 0; i < out.size(); ++i) out[i] /= pb[i];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (long long i = 0; i < self.grad.size(); ++i)
        an->grad[i] += self.grad[i] / bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (long long i = 0; i < self.grad.size(); ++i) {
        double d = bn->value[i];
        bn->grad[i] -= self.grad[i] * an->value[i] / (d * d);
      }
    }
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) out[i] += s;
  auto an = a.node();
  return make_op(std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

Var mul_scalar(const Var& a, double s) {
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) out[i] *= s;
  auto an = a.node();
  return make_op(std::move(out), {an}, [an, s](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i) an->grad[i] += s * self.grad[i];
  });
}

Var neg(const Var& a) { return mul_scalar(a, -1.0); }

Var relu(const Var& a) {
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) out[i] = out[i] > 0 ? out[i] : 0.0;
  auto an = a.node();
  return make_op(std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i)
      if (an->value[i] > 0) an->grad[i] += self.grad[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
  auto an = a.node();
  Tensor y = out;
  return make_op(std::move(out), {an}, [an, y](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i)
      an->grad[i] += self.grad[i] * y[i] * (1.0 - y[i]);
  });
}

Var exp_op(const Var& a) {
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  auto an = a.node();
  Tensor y = out;
  return make_op(std::move(out), {an}, [an, y](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * y[i];
  });
}

Var log_op(const Var& a) {
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  auto an = a.node();
  return make_op(std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i)
      an->grad[i] += self.grad[i] / an->value[i];
  });
}

Var square(const Var& a) {
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) out[i] *= out[i];
  auto an = a.node();
  return make_op(std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i)
      an->grad[i] += 2.0 * an->value[i] * self.grad[i];
  });
}

Var sqrt_op(const Var& a) {
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) out[i] = std::sqrt(out[i]);
  auto an = a.node();
  Tensor y = out;
  return make_op(std::move(out), {an}, [an, y](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i)
      an->grad[i] += self.grad[i] * 0.5 / y[i];
  });
}

Var softplus(const Var& a) {
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) {
    double x = out[i];
    out[i] = x > 30.0 ? x : std::log1p(std::exp(x));
  }
  auto an = a.node();
  return make_op(std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i)
      an->grad[i] += self.grad[i] * stable_sigmoid(an->value[i]);
  });
}

Var min_const(const Var& a, const Tensor& c) {
  if (!a.val().same_shape(c)) throw std::invalid_argument("min_const: shape mismatch");
  Tensor out = a.val();
  for (long long i = 0; i < out.size(); ++i) out[i] = std::min(out[i], c[i]);
  auto an = a.node();
  Tensor cc = c;
  return make_op(std::move(out), {an}, [an, cc](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i)
      if (an->value[i] <= cc[i]) an->grad[i] += self.grad[i];
  });
}

// ------------------------------------------------------- reductions / shaping

Var sum_all(const Var& a) {
  double s = 0.0;
  for (long long i = 0; i < a.val().size(); ++i) s += a.val()[i];
  auto an = a.node();
  return make_op(Tensor::scalar(s), {an}, [an](Node& self) {
    an->ensure_grad();
    double g = self.grad[0];
    for (long long i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
  });
}

Var mean_all(const Var& a) {
  long long n = a.val().size();
  double s = 0.0;
  for (long long i = 0; i < n; ++i) s += a.val()[i];
  auto an = a.node();
  return make_op(Tensor::scalar(s / static_cast<double>(n)), {an}, [an, n](Node& self) {
    an->ensure_grad();
    double g = self.grad[0] / static_cast<double>(n);
    for (long long i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
  });
}

Var masked_mean(const Var& a, const Tensor& mask) {
  if (!a.val().same_shape(mask)) throw std::invalid_argument("masked_mean: shape mismatch");
  double denom = 0.0, s = 0.0;
  for (long long i = 0; i < a.val().size(); ++i) {
    denom += mask[i];
    s += a.val()[i] * mask[i];
  }
  auto an = a.node();
  Tensor m = mask;
  double value = denom > 0.0 ? s / denom : 0.0;
  return make_op(Tensor::scalar(value), {an}, [an, m, denom](Node& self) {
    if (denom <= 0.0) return;
    an->ensure_grad();
    double g = self.grad[0] / denom;
    for (long long i = 0; i < an->grad.size(); ++i) an->grad[i] += g * m[i];
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  Tensor out = a.val().reshaped(std::move(shape));
  auto an = a.node();
  return make_op(std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

Var slice_channel(const Var& a, int c) {
  const Tensor& x = a.val();
  if (x.ndim() != 4) throw std::invalid_argument("slice_channel: need 4-d input");
  int N = x.dim(0), C = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (c < 0 || c >= C) throw std::invalid_argument("slice_channel: channel out of range");
  Tensor out({N, 1, x.dim(2), x.dim(3)});
  for (int n = 0; n < N; ++n) {
    const double* src = x.data() + ((static_cast<size_t>(n) * C + c) * hw);
    double* dst = out.data() + static_cast<size_t>(n) * hw;
    for (int i = 0; i < hw; ++i) dst[i] = src[i];
  }
  auto an = a.node();
  return make_op(std::move(out), {an}, [an, N, C, c, hw](Node& self) {
    an->ensure_grad();
    for (int n = 0; n < N; ++n) {
      double* dst = an->grad.data() + ((static_cast<size_t>(n) * C + c) * hw);
      const double* src = self.grad.data() + static_cast<size_t>(n) * hw;
      for (int i = 0; i < hw; ++i) dst[i] += src[i];
    }
  });
}

Var slice_cols(const Var& a, int c0, int c1) {
  const Tensor& x = a.val();
  if (x.ndim() != 2) throw std::invalid_argument("slice_cols: need 2-d input");
  int rows = x.dim(0), cols = x.dim(1);
  if (c0 < 0 || c1 > cols || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  Tensor out({rows, c1 - c0});
  for (int r = 0; r < rows; ++r)
    for (int c = c0; c < c1; ++c) out.at(r, c - c0) = x.at(r, c);
  auto an = a.node();
  return make_op(std::move(out), {an}, [an, c0, c1, rows](Node& self) {
    an->ensure_grad();
    for (int r = 0; r < rows; ++r)
      for (int c = c0; c < c1; ++c) an->grad.at(r, c) += self.grad.at(r, c - c0);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  int rows = parts[0].val().dim(0);
  int total = 0;
  for (const auto& p : parts) {
    if (p.val().ndim() != 2 || p.val().dim(0) != rows)
      throw std::invalid_argument("concat_cols: row mismatch");
    total += p.val().dim(1);
  }
  Tensor out({rows, total});
  std::vector<NodePtr> parents;
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    int c = p.val().dim(1);
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < c; ++j) out.at(r, off + j) = p.val().at(r, j);
    off += c;
    parents.push_back(p.node());
  }
  auto ps = parents;
  return make_op(std::move(out), std::move(parents), [ps, offsets, rows](Node& self) {
    for (size_t k = 0; k < ps.size(); ++k) {
      if (!ps[k]->requires_grad) continue;
      ps[k]->ensure_grad();
      int c = ps[k]->value.dim(1);
      for (int r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j)
          ps[k]->grad.at(r, j) += self.grad.at(r, offsets[k] + j);
    }
  });
}

Var stack_scalars(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("stack_scalars: empty");
  Tensor out({static_cast<int>(xs.size())});
  std::vector<NodePtr> parents;
  parents.reserve(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    out[static_cast<long long>(i)] = xs[i].item();
    parents.push_back(xs[i].node());
  }
  auto ps = parents;
  return make_op(std::move(out), std::move(parents), [ps](Node& self) {
    for (size_t i = 0; i < ps.size(); ++i) {
      if (!ps[i]->requires_grad) continue;
      ps[i]->ensure_grad();
      ps[i]->grad[0] += self.grad[static_cast<long long>(i)];
    }
  });
}

Var mean_rows(const Var& a) {
  const Tensor& x = a.val();
  if (x.ndim() != 2) throw std::invalid_argument("mean_rows: need 2-d input");
  int rows = x.dim(0), cols = x.dim(1);
  Tensor out({cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[c] += x.at(r, c);
  for (int c = 0; c < cols; ++c) out[c] /= rows;
  auto an = a.node();
  return make_op(std::move(out), {an}, [an, rows, cols](Node& self) {
    an->ensure_grad();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        an->grad.at(r, c) += self.grad[c] / static_cast<double>(rows);
  });
}

Var sample_tokens(const Var& x, int n) {
  const Tensor& X = x.val();
  if (X.ndim() != 4) throw std::invalid_argument("sample_tokens: need 4-d input");
  int N = X.dim(0), C = X.dim(1), hw = X.dim(2) * X.dim(3);
  if (n < 0 || n >= N) throw std::invalid_argument("sample_tokens: sample out of range");
  if (hw == 0) throw std::invalid_argument("sample_tokens: zero tokens");
  Tensor out({hw, C});
  for (int c = 0; c < C; ++c) {
    const double* src = X.data() + ((static_cast<size_t>(n) * C + c) * hw);
    for (int i = 0; i < hw; ++i) out.at(i, c) = src[i];
  }
  auto xn = x.node();
  return make_op(std::move(out), {xn}, [xn, n, C, hw](Node& self) {
    xn->ensure_grad();
    for (int c = 0; c < C; ++c) {
      double* dst = xn->grad.data() + ((static_cast<size_t>(n) * C + c) * hw);
      for (int i = 0; i < hw; ++i) dst[i] += self.grad.at(i, c);
    }
  });
}

// ------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (A.ndim() != 2 || B.ndim() != 2 || A.dim(1) != B.dim(0))
    throw std::invalid_argument("matmul: bad shapes " + A.shape_str() + " x " + B.shape_str());
  int m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out({m, n});
  CMapRM Am(A.data(), m, k), Bm(B.data(), k, n);
  MapRM(out.data(), m, n).noalias() = Am * Bm;
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
    CMapRM G(self.grad.data(), m, n);
    if (an->requires_grad) {
      an->ensure_grad();
      CMapRM Bm(bn->value.data(), k, n);
      MapRM(an->grad.data(), m, k).noalias() += G * Bm.transpose();
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      CMapRM Am(an->value.data(), m, k);
      MapRM(bn->grad.data(), k, n).noalias() += Am.transpose() * G;
    }
  });
}

Var transpose(const Var& a) {
  const Tensor& A = a.val();
  if (A.ndim() != 2) throw std::invalid_argument("transpose: need 2-d input");
  int m = A.dim(0), n = A.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
  auto an = a.node();
  return make_op(std::move(out), {an}, [an, m, n](Node& self) {
    an->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) an->grad.at(i, j) += self.grad.at(j, i);
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Tensor& X = x.val();
  const Tensor& W = w.val();
  if (X.ndim() != 2 || W.ndim() != 2 || X.dim(1) != W.dim(0))
    throw std::invalid_argument("linear: bad shapes");
  int r = X.dim(0), in = X.dim(1), out_dim = W.dim(1);
  Tensor out({r, out_dim});
  CMapRM Xm(X.data(), r, in), Wm(W.data(), in, out_dim);
  MapRM Om(out.data(), r, out_dim);
  Om.noalias() = Xm * Wm;
  if (b.defined()) {
    const Tensor& bv = b.val();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < out_dim; ++j) out.at(i, j) += bv[j];
  }
  auto xn = x.node(), wn = w.node();
  NodePtr bnp = b.defined() ? b.node() : nullptr;
  std::vector<NodePtr> parents = {xn, wn};
  if (bnp) parents.push_back(bnp);
  return make_op(std::move(out), std::move(parents), [xn, wn, bnp, r, in, out_dim](Node& self) {
    CMapRM G(self.grad.data(), r, out_dim);
    if (xn->requires_grad) {
      xn->ensure_grad();
      CMapRM Wm(wn->value.data(), in, out_dim);
      MapRM(xn->grad.data(), r, in).noalias() += G * Wm.transpose();
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      CMapRM Xm(xn->value.data(), r, in);
      MapRM(wn->grad.data(), in, out_dim).noalias() += Xm.transpose() * G;
    }
    if (bnp && bnp->requires_grad) {
      bnp->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < out_dim; ++j) bnp->grad[j] += self.grad.at(i, j);
    }
  });
}

Var softmax_rows(const Var& a) {
  const Tensor& X = a.val();
  if (X.ndim() != 2) throw std::invalid_argument("softmax_rows: need 2-d input");
  int r = X.dim(0), c = X.dim(1);
  Tensor out({r, c});
  for (int i = 0; i < r; ++i) {
    double mx = X.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, X.at(i, j));
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      double e = std::exp(X.at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < c; ++j) out.at(i, j) /= z;
  }
  auto an = a.node();
  Tensor y = out;
  return make_op(std::move(out), {an}, [an, y, r, c](Node& self) {
    an->ensure_grad();
    for (int i = 0; i < r; ++i) {
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += self.grad.at(i, j) * y.at(i, j);
      for (int j = 0; j < c; ++j)
        an->grad.at(i, j) += y.at(i, j) * (self.grad.at(i, j) - dot);
    }
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& X = x.val();
  if (X.ndim() != 2) throw std::invalid_argument("layer_norm_rows: need 2-d input");
  int r = X.dim(0), d = X.dim(1);
  if (gamma.val().size() != d || beta.val().size() != d)
    throw std::invalid_argument("layer_norm_rows: affine size mismatch");
  Tensor out({r, d});
  Tensor xhat({r, d});
  std::vector<double> inv_std(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += X.at(i, j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double v = X.at(i, j) - mu;
      var += v * v;
    }
    var /= d;
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = is;
    for (int j = 0; j < d; ++j) {
      double xh = (X.at(i, j) - mu) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = gamma.val()[j] * xh + beta.val()[j];
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_op(std::move(out), {xn, gn, bn},
                 [xn, gn, bn, xhat, inv_std, r, d](Node& self) {
    for (int i = 0; i < r; ++i) {
      double mean_g = 0.0, mean_gx = 0.0;
      std::vector<double> gh(static_cast<size_t>(d));
      for (int j = 0; j < d; ++j) {
        double g = self.grad.at(i, j) * gn->value[j];
        gh[static_cast<size_t>(j)] = g;
        mean_g += g;
        mean_gx += g * xhat.at(i, j);
      }
      mean_g /= d;
      mean_gx /= d;
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (int j = 0; j < d; ++j)
          xn->grad.at(i, j) += inv_std[static_cast<size_t>(i)] *
                               (gh[static_cast<size_t>(j)] - mean_g - xhat.at(i, j) * mean_gx);
      }
    }
    if (gn->requires_grad) {
      gn->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < d; ++j) gn->grad[j] += self.grad.at(i, j) * xhat.at(i, j);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < d; ++j) bn->grad[j] += self.grad.at(i, j);
    }
  });
}

// ------------------------------------------------------------ conv / tracking

namespace {

// Gathers one sample's receptive fields into (Cin*kh*kw, P) row-major.
void im2col(const Tensor& x, int n, int kh, int kw, int stride, int pad,
            int ho, int wo, MatRM& col) {
  int cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  int P = ho * wo;
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        int row = (c * kh + ky) * kw + kx;
        double* dst = col.data() + static_cast<size_t>(row) * P;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + kx;
            dst[oy * wo + ox] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w) ? x.at(n, c, iy, ix) : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(Tensor& gx, int n, int kh, int kw, int stride, int pad,
                int ho, int wo, const MatRM& gcol) {
  int cin = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
  int P = ho * wo;
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        int row = (c * kh + ky) * kw + kx;
        const double* src = gcol.data() + static_cast<size_t>(row) * P;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            gx.at(n, c, iy, ix) += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Tensor& X = x.val();
  const Tensor& W = w.val();
  if (X.ndim() != 4 || W.ndim() != 4) throw std::invalid_argument("conv2d: need 4-d tensors");
  int N = X.dim(0), cin = X.dim(1), h = X.dim(2), wd = X.dim(3);
  int cout = W.dim(0), kh = W.dim(2), kw = W.dim(3);
  if (W.dim(1) != cin) throw std::invalid_argument("conv2d: channel mismatch");
  int ho = (h + 2 * pad - kh) / stride + 1;
  int wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: empty output");
  int K = cin * kh * kw, P = ho * wo;

  Tensor out({N, cout, ho, wo});
  CMapRM Wm(W.data(), cout, K);
#pragma omp parallel for schedule(static) num_threads(op_threads())
  for (int n = 0; n < N; ++n) {
    MatRM col(K, P);
    im2col(X, n, kh, kw, stride, pad, ho, wo, col);
    MapRM(out.data() + static_cast<size_t>(n) * cout * P, cout, P).noalias() = Wm * col;
  }
  if (b.defined()) {
    const Tensor& bv = b.val();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < cout; ++c) {
        double bias = bv[c];
        double* p = out.data() + ((static_cast<size_t>(n) * cout + c) * P);
        for (int i = 0; i < P; ++i) p[i] += bias;
      }
  }

  auto xn = x.node(), wn = w.node();
  NodePtr bnp = b.defined() ? b.node() : nullptr;
  std::vector<NodePtr> parents = {xn, wn};
  if (bnp) parents.push_back(bnp);
  return make_op(std::move(out), std::move(parents),
                 [xn, wn, bnp, N, cin, cout, kh, kw, stride, pad, ho, wo, K, P](Node& self) {
    CMapRM Wm(wn->value.data(), cout, K);
    bool need_x = xn->requires_grad, need_w = wn->requires_grad;
    if (need_x) xn->ensure_grad();
    if (need_w) wn->ensure_grad();
    // Per-sample weight-gradient buffers, reduced in sample order so the
    // result does not depend on the thread count.
    std::vector<MatRM> gw_parts;
    if (need_w) gw_parts.assign(static_cast<size_t>(N), MatRM::Zero(cout, K));
#pragma omp parallel for schedule(static) num_threads(op_threads())
    for (int n = 0; n < N; ++n) {
      MatRM col(K, P);
      im2col(xn->value, n, kh, kw, stride, pad, ho, wo, col);
      CMapRM G(self.grad.data() + static_cast<size_t>(n) * cout * P, cout, P);
      if (need_w) gw_parts[static_cast<size_t>(n)].noalias() = G * col.transpose();
      if (need_x) {
        MatRM gcol(K, P);
        gcol.noalias() = Wm.transpose() * G;
        col2im_add(xn->grad, n, kh, kw, stride, pad, ho, wo, gcol);
      }
    }
    if (need_w) {
      MapRM GW(wn->grad.data(), cout, K);
      for (int n = 0; n < N; ++n) GW += gw_parts[static_cast<size_t>(n)];
    }
    if (bnp && bnp->requires_grad) {
      bnp->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < cout; ++c) {
          const double* g = self.grad.data() + ((static_cast<size_t>(n) * cout + c) * P);
          double s = 0.0;
          for (int i = 0; i < P; ++i) s += g[i];
          bnp->grad[c] += s;
        }
    }
  });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& X = x.val();
  if (X.ndim() != 4) throw std::invalid_argument("instance_norm: need 4-d input");
  int N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  if (gamma.val().size() != C || beta.val().size() != C)
    throw std::invalid_argument("instance_norm: affine size mismatch");
  int hw = H * W;
  Tensor out({N, C, H, W});
  Tensor xhat({N, C, H, W});
  std::vector<double> inv_std(static_cast<size_t>(N) * C);
#pragma omp parallel for schedule(static) collapse(2) num_threads(op_threads())
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* px = X.data() + ((static_cast<size_t>(n) * C + c) * hw);
      double mu = 0.0;
      for (int i = 0; i < hw; ++i) mu += px[i];
      mu /= hw;
      double var = 0.0;
      for (int i = 0; i < hw; ++i) {
        double v = px[i] - mu;
        var += v * v;
      }
      var /= hw;
      double is = 1.0 / std::sqrt(var + eps);
      inv_std[static_cast<size_t>(n) * C + c] = is;
      double g = gamma.val()[c], bta = beta.val()[c];
      double* ph = xhat.data() + ((static_cast<size_t>(n) * C + c) * hw);
      double* po = out.data() + ((static_cast<size_t>(n) * C + c) * hw);
      for (int i = 0; i < hw; ++i) {
        double xh = (px[i] - mu) * is;
        ph[i] = xh;
        po[i] = g * xh + bta;
      }
    }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_op(std::move(out), {xn, gn, bn},
                 [xn, gn, bn, xhat, inv_std, N, C, hw](Node& self) {
    bool need_x = xn->requires_grad;
    if (need_x) xn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2) num_threads(op_threads())
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        if (!need_x) continue;
        size_t base = (static_cast<size_t>(n) * C + c) * hw;
        const double* g0 = self.grad.data() + base;
        const double* xh = xhat.data() + base;
        double gmul = gn->value[c];
        double mean_g = 0.0, mean_gx = 0.0;
        for (int i = 0; i < hw; ++i) {
          double g = g0[i] * gmul;
          mean_g += g;
          mean_gx += g * xh[i];
        }
        mean_g /= hw;
        mean_gx /= hw;
        double is = inv_std[static_cast<size_t>(n) * C + c];
        double* gx = xn->grad.data() + base;
        for (int i = 0; i < hw; ++i)
          gx[i] += is * (g0[i] * gmul - mean_g - xh[i] * mean_gx);
      }
    if (gn->requires_grad) {
      gn->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          size_t base = (static_cast<size_t>(n) * C + c) * hw;
          double s = 0.0;
          for (int i = 0; i < hw; ++i) s += self.grad[base + i] * xhat[base + i];
          gn->grad[c] += s;
        }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          size_t base = (static_cast<size_t>(n) * C + c) * hw;
          double s = 0.0;
          for (int i = 0; i < hw; ++i) s += self.grad[base + i];
          bn->grad[c] += s;
        }
    }
  });
}

Var depthwise_xcorr(const Var& z, const Var& x) {
  const Tensor& Z = z.val();
  const Tensor& X = x.val();
  if (Z.ndim() != 4 || X.ndim() != 4) throw std::invalid_argument("depthwise_xcorr: need 4-d");
  int N = Z.dim(0), C = Z.dim(1);
  if (X.dim(0) != N || X.dim(1) != C)
    throw std::invalid_argument("depthwise_xcorr: channel mismatch");
  int hz = Z.dim(2), wz = Z.dim(3), hx = X.dim(2), wx = X.dim(3);
  if (hz > hx || wz > wx)
    throw std::invalid_argument("depthwise_xcorr: template larger than search");
  int ho = hx - hz + 1, wo = wx - wz + 1;
  Tensor out({N, C, ho, wo});
#pragma omp parallel for schedule(static) collapse(2) num_threads(op_threads())
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          double s = 0.0;
          for (int u = 0; u < hz; ++u)
            for (int v = 0; v < wz; ++v)
              s += Z.at(n, c, u, v) * X.at(n, c, i + u, j + v);
          out.at(n, c, i, j) = s;
        }
  auto zn = z.node(), xn = x.node();
  return make_op(std::move(out), {zn, xn},
                 [zn, xn, N, C, hz, wz, ho, wo](Node& self) {
    bool need_z = zn->requires_grad, need_x = xn->requires_grad;
    if (need_z) zn->ensure_grad();
    if (need_x) xn->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2) num_threads(op_threads())
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < ho; ++i)
          for (int j = 0; j < wo; ++j) {
            double g = self.grad.at(n, c, i, j);
            if (g == 0.0) continue;
            for (int u = 0; u < hz; ++u)
              for (int v = 0; v < wz; ++v) {
                if (need_z) zn->grad.at(n, c, u, v) += g * xn->value.at(n, c, i + u, j + v);
                if (need_x) xn->grad.at(n, c, i + u, j + v) += g * zn->value.at(n, c, u, v);
              }
          }
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& X = x.val();
  if (X.ndim() != 4) throw std::invalid_argument("global_avg_pool: need 4-d input");
  int N = X.dim(0), C = X.dim(1), hw = X.dim(2) * X.dim(3);
  Tensor out({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* p = X.data() + ((static_cast<size_t>(n) * C + c) * hw);
      double s = 0.0;
      for (int i = 0; i < hw; ++i) s += p[i];
      out.at(n, c) = s / hw;
    }
  auto xn = x.node();
  return make_op(std::move(out), {xn}, [xn, N, C, hw](Node& self) {
    xn->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        double g = self.grad.at(n, c) / hw;
        double* p = xn->grad.data() + ((static_cast<size_t>(n) * C + c) * hw);
        for (int i = 0; i < hw; ++i) p[i] += g;
      }
  });
}

Var l2_normalize_rows(const Var& x, double eps) {
  const Tensor& X = x.val();
  if (X.ndim() != 2) throw std::invalid_argument("l2_normalize_rows: need 2-d input");
  int r = X.dim(0), d = X.dim(1);
  Tensor out({r, d});
  std::vector<double> norms(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += X.at(i, j) * X.at(i, j);
    double nrm = std::sqrt(s);
    norms[static_cast<size_t>(i)] = nrm;
    if (nrm > eps)
      for (int j = 0; j < d; ++j) out.at(i, j) = X.at(i, j) / nrm;
  }
  auto xn = x.node();
  Tensor y = out;
  return make_op(std::move(out), {xn}, [xn, y, norms, r, d, eps](Node& self) {
    xn->ensure_grad();
    for (int i = 0; i < r; ++i) {
      double nrm = norms[static_cast<size_t>(i)];
      if (nrm <= eps) continue;
      double dot = 0.0;
      for (int j = 0; j < d; ++j) dot += self.grad.at(i, j) * y.at(i, j);
      for (int j = 0; j < d; ++j)
        xn->grad.at(i, j) += (self.grad.at(i, j) - y.at(i, j) * dot) / nrm;
    }
  });
}

// ------------------------------------------------------ adaptation primitives

Var grad_reverse(const Var& x, double coefficient) {
  if (coefficient < 0) throw std::invalid_argument("grad_reverse: negative coefficient");
  Tensor out = x.val();
  auto xn = x.node();
  return make_op(std::move(out), {xn}, [xn, coefficient](Node& self) {
    xn->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i)
      xn->grad[i] += -coefficient * self.grad[i];
  });
}

Var pairwise_sqdist(const Var& a, const Var& b) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (A.ndim() != 2 || B.ndim() != 2 || A.dim(1) != B.dim(1))
    throw std::invalid_argument("pairwise_sqdist: dimension mismatch");
  int n = A.dim(0), m = B.dim(0), d = A.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double v = A.at(i, k) - B.at(j, k);
        s += v * v;
      }
      out.at(i, j) = s;
    }
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {an, bn}, [an, bn, n, m, d](Node& self) {
    if (an->requires_grad) an->ensure_grad();
    if (bn->requires_grad) bn->ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        double g = self.grad.at(i, j);
        if (g == 0.0) continue;
        for (int k = 0; k < d; ++k) {
          double diff = an->value.at(i, k) - bn->value.at(j, k);
          if (an->requires_grad) an->grad.at(i, k) += 2.0 * g * diff;
          if (bn->requires_grad) bn->grad.at(j, k) -= 2.0 * g * diff;
        }
      }
  });
}

Var rbf_from_sqdist(const Var& d2, double sigma, const std::vector<double>& multipliers) {
  if (multipliers.empty()) throw std::invalid_argument("rbf_from_sqdist: no multipliers");
  std::vector<double> denoms;
  denoms.reserve(multipliers.size());
  for (double mu : multipliers) {
    if (mu <= 0) throw std::invalid_argument("rbf_from_sqdist: non-positive multiplier");
    denoms.push_back(2.0 * (mu * sigma) * (mu * sigma));
  }
  double inv_m = 1.0 / static_cast<double>(denoms.size());
  Tensor out = d2.val();
  for (long long i = 0; i < out.size(); ++i) {
    double dist = d2.val()[i];
    double s = 0.0;
    for (double den : denoms) s += std::exp(-dist / den);
    out[i] = s * inv_m;
  }
  auto dn = d2.node();
  return make_op(std::move(out), {dn}, [dn, denoms, inv_m](Node& self) {
    dn->ensure_grad();
    for (long long i = 0; i < self.grad.size(); ++i) {
      double dist = dn->value[i];
      double s = 0.0;
      for (double den : denoms) s += -std::exp(-dist / den) / den;
      dn->grad[i] += self.grad[i] * s * inv_m;
    }
  });
}

Var quadform(const std::vector<double>& wa, const Var& k, const std::vector<double>& wb) {
  const Tensor& K = k.val();
  if (K.ndim() != 2 || K.dim(0) != static_cast<int>(wa.size()) ||
      K.dim(1) != static_cast<int>(wb.size()))
    throw std::invalid_argument("quadform: size mismatch");
  int n = K.dim(0), m = K.dim(1);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    if (wa[static_cast<size_t>(i)] == 0.0) continue;
    double row = 0.0;
    for (int j = 0; j < m; ++j) row += K.at(i, j) * wb[static_cast<size_t>(j)];
    s += wa[static_cast<size_t>(i)] * row;
  }
  auto kn = k.node();
  return make_op(Tensor::scalar(s), {kn}, [kn, wa, wb, n, m](Node& self) {
    kn->ensure_grad();
    double g = self.grad[0];
    for (int i = 0; i < n; ++i) {
      double gi = g * wa[static_cast<size_t>(i)];
      if (gi == 0.0) continue;
      for (int j = 0; j < m; ++j) kn->grad.at(i, j) += gi * wb[static_cast<size_t>(j)];
    }
  });
}

// ----------------------------------------------------------------- losses

Var masked_bce_with_logits(const Var& logits, const Tensor& targets, const Tensor& mask) {
  if (!logits.val().same_shape(targets) || !logits.val().same_shape(mask))
    throw std::invalid_argument("masked_bce_with_logits: shape mismatch");
  double denom = 0.0, total = 0.0;
  for (long long i = 0; i < mask.size(); ++i) denom += mask[i];
  if (denom > 0.0) {
    for (long long i = 0; i < mask.size(); ++i) {
      if (mask[i] == 0.0) continue;
      double x = logits.val()[i], t = targets[i];
      double l = std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
      total += mask[i] * l;
    }
    total /= denom;
  }
  auto ln = logits.node();
  Tensor tg = targets, m = mask;
  return make_op(Tensor::scalar(total), {ln}, [ln, tg, m, denom](Node& self) {
    if (denom <= 0.0) return;
    ln->ensure_grad();
    double g = self.grad[0] / denom;
    for (long long i = 0; i < m.size(); ++i) {
      if (m[i] == 0.0) continue;
      ln->grad[i] += g * m[i] * (stable_sigmoid(ln->value[i]) - tg[i]);
    }
  });
}

}  // namespace pdat::nn
