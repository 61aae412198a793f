#include "pdat/csda/lmmd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pdat::csda {

double median_pairwise_distance(const nn::Tensor& a, const nn::Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
    throw std::invalid_argument("median_pairwise_distance: dimension mismatch");
  int d = a.dim(1);
  std::vector<const double*> rows;
  for (int i = 0; i < a.dim(0); ++i) rows.push_back(a.data() + static_cast<size_t>(i) * d);
  for (int i = 0; i < b.dim(0); ++i) rows.push_back(b.data() + static_cast<size_t>(i) * d);
  size_t n = rows.size();
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double v = rows[i][k] - rows[j][k];
        s += v * v;
      }
      dists.push_back(std::sqrt(s));
    }
  if (dists.empty()) return 0.0;
  std::sort(dists.begin(), dists.end());
  size_t m = dists.size();
  return m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
}

KernelMatrix kernel_matrix(const nn::Var& a, const nn::Var& b, const KernelConfig& cfg) {
  if (cfg.multipliers.empty())
    throw std::invalid_argument("kernel_matrix: need at least one multiplier");
  for (double mu : cfg.multipliers)
    if (mu <= 0) throw std::invalid_argument("kernel_matrix: multipliers must be positive");
  KernelMatrix out;
  out.sigma = median_pairwise_distance(a.val(), b.val());
  if (out.sigma <= 0.0) {
    out.sigma = 1.0;
    out.degenerate_sigma = true;
  }
  out.k = nn::rbf_from_sqdist(nn::pairwise_sqdist(a, b), out.sigma, cfg.multipliers);
  return out;
}

std::vector<double> lmmd_weights(const std::vector<int>& labels, int cls) {
  int count = 0;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("lmmd_weights: negative label");
    if (l == cls) ++count;
  }
  if (count == 0) return {};  // class absent in this domain
  std::vector<double> w(labels.size(), 0.0);
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == cls) w[i] = 1.0 / count;
  return w;
}

LmmdResult lmmd_loss(const nn::Var& feat_s, const nn::Var& feat_t,
                     const std::vector<int>& labels_s, const std::vector<int>& labels_t,
                     int num_classes, const KernelConfig& cfg) {
  if (feat_s.val().ndim() != 2 || feat_t.val().ndim() != 2 ||
      feat_s.val().dim(1) != feat_t.val().dim(1))
    throw std::invalid_argument("lmmd_loss: feature dimension mismatch");
  if (static_cast<int>(labels_s.size()) != feat_s.val().dim(0) ||
      static_cast<int>(labels_t.size()) != feat_t.val().dim(0))
    throw std::invalid_argument("lmmd_loss: label count mismatch");

  LmmdResult out;

  // one bandwidth across all three kernel blocks
  double sigma = median_pairwise_distance(feat_s.val(), feat_t.val());
  if (sigma <= 0.0) {
    sigma = 1.0;
    out.degenerate_sigma = true;
  }
  nn::Var k_ss = nn::rbf_from_sqdist(nn::pairwise_sqdist(feat_s, feat_s), sigma, cfg.multipliers);
  nn::Var k_tt = nn::rbf_from_sqdist(nn::pairwise_sqdist(feat_t, feat_t), sigma, cfg.multipliers);
  nn::Var k_st = nn::rbf_from_sqdist(nn::pairwise_sqdist(feat_s, feat_t), sigma, cfg.multipliers);

  nn::Var acc;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<double> ws = lmmd_weights(labels_s, c);
    std::vector<double> wt = lmmd_weights(labels_t, c);
    if (ws.empty() || wt.empty()) continue;  // class must appear in both domains
    ++out.classes_used;
    nn::Var term = nn::add(nn::quadform(ws, k_ss, ws), nn::quadform(wt, k_tt, wt));
    term = nn::sub(term, nn::mul_scalar(nn::quadform(ws, k_st, wt), 2.0));
    acc = acc.defined() ? nn::add(acc, term) : term;
  }

  if (out.classes_used == 0) {
    out.skipped = true;
    out.loss = nn::Var::leaf(nn::Tensor::scalar(0.0));
    return out;
  }
  out.loss = nn::mul_scalar(acc, 1.0 / out.classes_used);
  return out;
}

}  // namespace pdat::csda
