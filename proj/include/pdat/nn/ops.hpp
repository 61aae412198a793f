#ifndef PDAT_NN_OPS_HPP
#define PDAT_NN_OPS_HPP

#include <vector>

#include "pdat/nn/autograd.hpp"

namespace pdat::nn {

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var neg(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var exp_op(const Var& a);
Var log_op(const Var& a);  // caller guarantees positivity
Var square(const Var& a);
Var sqrt_op(const Var& a);
Var softplus(const Var& a);
// min(a, c) with a constant tensor; ties route gradient to a.
Var min_const(const Var& a, const Tensor& c);

// ---- reductions / shaping ----
Var sum_all(const Var& a);
Var mean_all(const Var& a);
// mean over masked entries; zero mask -> value 0, zero gradient.
Var masked_mean(const Var& a, const Tensor& mask);
Var reshape(const Var& a, std::vector<int> shape);
Var slice_channel(const Var& a, int c);                // (N,C,H,W) -> (N,1,H,W)
Var slice_cols(const Var& a, int c0, int c1);          // (R, C) -> (R, c1-c0)
Var concat_cols(const std::vector<Var>& parts);        // (R, Ci) -> (R, sum Ci)
Var stack_scalars(const std::vector<Var>& xs);         // n scalars -> (n)
Var mean_rows(const Var& a);                           // (R, C) -> (C)
Var sample_tokens(const Var& x, int n);                // (N,C,H,W) -> (H*W, C)

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);                // (m,k)x(k,n)
Var transpose(const Var& a);                           // (m,n) -> (n,m)
Var linear(const Var& x, const Var& w, const Var& b);  // (R,in)x(in,out)+b
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// ---- conv / tracking primitives ----
// x: (N,Cin,H,W), w: (Cout,Cin,kh,kw), b: (Cout) or undefined for no bias.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// Per-(n,c) normalization over spatial positions with per-channel affine.
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// Valid depthwise cross-correlation: z (N,C,hz,wz) slides over x (N,C,hx,wx).
Var depthwise_xcorr(const Var& z, const Var& x);
Var global_avg_pool(const Var& x);                     // (N,C,H,W) -> (N,C)
// Rows with norm <= eps stay zero and receive zero gradient.
Var l2_normalize_rows(const Var& x, double eps = 1e-12);

// ---- adaptation primitives ----
// Forward identity; backward multiplies the upstream gradient by -coefficient.
Var grad_reverse(const Var& x, double coefficient);
// D[i][j] = ||a_i - b_j||^2 for row vectors.
Var pairwise_sqdist(const Var& a, const Var& b);
// K = mean_mu exp(-D / (2 (mu*sigma)^2)); sigma and multipliers are constants.
Var rbf_from_sqdist(const Var& d2, double sigma, const std::vector<double>& multipliers);
// w_a^T K w_b with constant weight vectors.
Var quadform(const std::vector<double>& wa, const Var& k, const std::vector<double>& wb);

// ---- losses ----
// Stable elementwise BCE-with-logits against (possibly soft) targets,
// averaged over mask-selected entries. Zero mask -> 0.
Var masked_bce_with_logits(const Var& logits, const Tensor& targets, const Tensor& mask);

// Threading knob for the batched kernels below (conv, xcorr, norm).
void set_op_threads(int n);
int op_threads();

}  // namespace pdat::nn

#endif
