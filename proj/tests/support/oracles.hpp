#ifndef PDAT_TESTS_ORACLES_HPP
#define PDAT_TESTS_ORACLES_HPP

// Independent straight-line reimplementations used as test oracles. These
// deliberately avoid the library's code paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pdat/nn/tensor.hpp"

namespace testsupport {

// Per-channel valid sliding-window dot product.
inline pdat::nn::Tensor xcorr_oracle(const pdat::nn::Tensor& z, const pdat::nn::Tensor& x) {
  int n = z.dim(0), c = z.dim(1), hz = z.dim(2), wz = z.dim(3);
  int hx = x.dim(2), wx = x.dim(3);
  pdat::nn::Tensor out({n, c, hx - hz + 1, wx - wz + 1});
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i + hz <= hx; ++i)
        for (int j = 0; j + wz <= wx; ++j) {
          double acc = 0.0;
          for (int u = 0; u < hz; ++u)
            for (int v = 0; v < wz; ++v)
              acc += z.at(b, ch, u, v) * x.at(b, ch, i + u, j + v);
          out.at(b, ch, i, j) = acc;
        }
  return out;
}

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Definitional silhouette: a(i) over own cluster, b(i) min mean distance to
// another cluster, s(i) = (b-a)/max(a,b); singletons contribute 0.
inline double silhouette_oracle(const std::vector<std::vector<double>>& pts,
                                const std::vector<int>& labels, int k) {
  int n = static_cast<int>(pts.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> sum(static_cast<size_t>(k), 0.0);
    std::vector<int> cnt(static_cast<size_t>(k), 0);
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      sum[static_cast<size_t>(labels[static_cast<size_t>(j)])] +=
          euclid(pts[static_cast<size_t>(i)], pts[static_cast<size_t>(j)]);
      ++cnt[static_cast<size_t>(labels[static_cast<size_t>(j)])];
    }
    int li = labels[static_cast<size_t>(i)];
    int own = cnt[static_cast<size_t>(li)];
    if (own == 0) continue;  // singleton
    double a = sum[static_cast<size_t>(li)] / own;
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == li || cnt[static_cast<size_t>(c)] == 0) continue;
      b = std::min(b, sum[static_cast<size_t>(c)] / cnt[static_cast<size_t>(c)]);
    }
    if (!std::isfinite(b)) continue;
    double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / n;
}

// Median pairwise distance over the union, averaging the two middle values
// for even counts (the library's declared convention).
inline double median_distance_oracle(const std::vector<std::vector<double>>& a,
                                     const std::vector<std::vector<double>>& b) {
  std::vector<std::vector<double>> all = a;
  all.insert(all.end(), b.begin(), b.end());
  std::vector<double> d;
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j) d.push_back(euclid(all[i], all[j]));
  std::sort(d.begin(), d.end());
  if (d.empty()) return 0.0;
  size_t m = d.size();
  return m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

inline double rbf_oracle(const std::vector<double>& a, const std::vector<double>& b, double sigma,
                         const std::vector<double>& mults) {
  double d = euclid(a, b);
  double s = 0.0;
  for (double mu : mults) s += std::exp(-(d * d) / (2.0 * (mu * sigma) * (mu * sigma)));
  return s / static_cast<double>(mults.size());
}

// Definitional class-weighted sum, triple-nested, sigma from the union of
// both feature sets.
inline double lmmd_oracle(const std::vector<std::vector<double>>& fs,
                          const std::vector<std::vector<double>>& ft,
                          const std::vector<int>& ls, const std::vector<int>& lt, int classes,
                          const std::vector<double>& mults) {
  double sigma = median_distance_oracle(fs, ft);
  if (sigma <= 0) sigma = 1.0;
  double total = 0.0;
  int used = 0;
  for (int c = 0; c < classes; ++c) {
    int ns_c = 0, nt_c = 0;
    for (int l : ls)
      if (l == c) ++ns_c;
    for (int l : lt)
      if (l == c) ++nt_c;
    if (ns_c == 0 || nt_c == 0) continue;
    ++used;
    auto w = [](int label, int cls, int count) {
      return label == cls ? 1.0 / count : 0.0;
    };
    double term = 0.0;
    for (size_t i = 0; i < fs.size(); ++i)
      for (size_t j = 0; j < fs.size(); ++j)
        term += w(ls[i], c, ns_c) * w(ls[j], c, ns_c) * rbf_oracle(fs[i], fs[j], sigma, mults);
    for (size_t i = 0; i < ft.size(); ++i)
      for (size_t j = 0; j < ft.size(); ++j)
        term += w(lt[i], c, nt_c) * w(lt[j], c, nt_c) * rbf_oracle(ft[i], ft[j], sigma, mults);
    for (size_t i = 0; i < fs.size(); ++i)
      for (size_t j = 0; j < ft.size(); ++j)
        term -= 2.0 * w(ls[i], c, ns_c) * w(lt[j], c, nt_c) * rbf_oracle(fs[i], ft[j], sigma, mults);
    total += term;
  }
  return used > 0 ? total / used : 0.0;
}

// Straight-line least-squares adversarial losses (labels: source 0, target 1).
inline double adv_g_oracle(const std::vector<double>& d_xt, const std::vector<double>& d_zt) {
  double sx = 0.0, sz = 0.0;
  for (double v : d_xt) sx += (v - 0.0) * (v - 0.0);
  for (double v : d_zt) sz += (v - 0.0) * (v - 0.0);
  return sx / d_xt.size() + sz / d_zt.size();
}

inline double adv_d_oracle(const std::vector<double>& d_xs, const std::vector<double>& d_zs,
                           const std::vector<double>& d_xt, const std::vector<double>& d_zt) {
  double total = 0.0;
  double sx = 0.0;
  for (double v : d_xs) sx += v * v;
  total += sx / d_xs.size();
  double sz = 0.0;
  for (double v : d_zs) sz += v * v;
  total += sz / d_zs.size();
  double tx = 0.0;
  for (double v : d_xt) tx += (v - 1.0) * (v - 1.0);
  total += tx / d_xt.size();
  double tz = 0.0;
  for (double v : d_zt) tz += (v - 1.0) * (v - 1.0);
  total += tz / d_zt.size();
  return total;
}

// Brute-force voting with the same tie rule the library declares.
inline int vote_oracle(const std::vector<int>& labels, const std::vector<double>& weights) {
  int max_label = *std::max_element(labels.begin(), labels.end());
  std::vector<double> score(static_cast<size_t>(max_label) + 1, 0.0);
  for (size_t m = 0; m < labels.size(); ++m) score[static_cast<size_t>(labels[m])] += weights[m];
  double best = -1.0;
  for (double s : score) best = std::max(best, s);
  if (score[static_cast<size_t>(labels.back())] == best) return labels.back();
  for (size_t c = 0; c < score.size(); ++c)
    if (score[c] == best) return static_cast<int>(c);
  return -1;
}

}  // namespace testsupport

#endif
