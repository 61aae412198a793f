#include "pdat/eval/probe.hpp"

#include <algorithm>
#include <map>
#include <cmath>
#include <random>
#include <stdexcept>

#include "pdat/core/rng.hpp"

namespace pdat::eval {

namespace {

double kernel_value(const csda::Vec& a, const csda::Vec& b, double sigma,
                    const std::vector<double>& multipliers) {
  double d2 = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    double v = a[k] - b[k];
    d2 += v * v;
  }
  double s = 0.0;
  for (double mu : multipliers) s += std::exp(-d2 / (2.0 * (mu * sigma) * (mu * sigma)));
  return s / static_cast<double>(multipliers.size());
}

nn::Tensor rows_tensor(const std::vector<csda::Vec>& rows) {
  nn::Tensor t({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      t.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return t;
}

}  // namespace

double squared_mmd(const std::vector<csda::Vec>& a, const std::vector<csda::Vec>& b,
                   const csda::KernelConfig& kernel) {
  if (a.empty() || b.empty()) throw std::invalid_argument("squared_mmd: empty set");
  double sigma = csda::median_pairwise_distance(rows_tensor(a), rows_tensor(b));
  if (sigma <= 0.0) sigma = 1.0;
  double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  double ss = 0.0, tt = 0.0, st = 0.0;
  for (const auto& x : a)
    for (const auto& y : a) ss += kernel_value(x, y, sigma, kernel.multipliers);
  for (const auto& x : b)
    for (const auto& y : b) tt += kernel_value(x, y, sigma, kernel.multipliers);
  for (const auto& x : a)
    for (const auto& y : b) st += kernel_value(x, y, sigma, kernel.multipliers);
  return ss / (n * n) + tt / (m * m) - 2.0 * st / (n * m);
}

DomainGapResult domain_gap_probe(const std::vector<csda::Vec>& descriptors_s,
                                 const std::vector<csda::Vec>& descriptors_t,
                                 const csda::KernelConfig& kernel, uint64_t seed) {
  if (descriptors_s.size() < 32 || descriptors_t.size() < 32)
    throw std::invalid_argument("domain_gap_probe: need at least 32 descriptors per domain");

  DomainGapResult out;
  out.squared_mmd = squared_mmd(descriptors_s, descriptors_t, kernel);

  // logistic separator on an 80/20 split
  size_t dim = descriptors_s[0].size();
  std::vector<const csda::Vec*> xs;
  std::vector<double> ys;
  for (const auto& v : descriptors_s) {
    xs.push_back(&v);
    ys.push_back(0.0);
  }
  for (const auto& v : descriptors_t) {
    xs.push_back(&v);
    ys.push_back(1.0);
  }
  // 80/20 split by descriptor identity: exact duplicates stay on one side,
  // otherwise held-out copies of training points would leak labels
  std::map<csda::Vec, std::vector<size_t>> groups;
  for (size_t i = 0; i < xs.size(); ++i) groups[*xs[i]].push_back(i);
  std::vector<std::vector<size_t>> group_list;
  for (auto& [key, members] : groups) group_list.push_back(members);
  auto rng = make_rng(seed, "domain_probe_split");
  std::shuffle(group_list.begin(), group_list.end(), rng);

  std::vector<size_t> order;
  order.reserve(xs.size());
  size_t n_train = 0;
  size_t train_goal = (xs.size() * 8) / 10;
  for (const auto& members : group_list) {
    if (n_train < train_goal) {
      order.insert(order.begin() + static_cast<long>(n_train), members.begin(), members.end());
      n_train += members.size();
    } else {
      order.insert(order.end(), members.begin(), members.end());
    }
  }

  // ridge-regularized logistic fit; the penalty keeps the probe from
  // memorizing noise directions, so statistically identical domains score
  // near chance while a real gap still separates cleanly
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  double lr = 0.2;
  for (int it = 0; it < 150; ++it) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0.0;
    for (size_t k = 0; k < n_train; ++k) {
      const csda::Vec& x = *xs[order[k]];
      double z = b;
      for (size_t j = 0; j < dim; ++j) z += w[j] * x[j];
      double p = 1.0 / (1.0 + std::exp(-z));
      double g = p - ys[order[k]];
      for (size_t j = 0; j < dim; ++j) gw[j] += g * x[j];
      gb += g;
    }
    for (size_t j = 0; j < dim; ++j) w[j] -= lr * (gw[j] / n_train + 1e-2 * w[j]);
    b -= lr * gb / n_train;
  }

  int correct = 0, total = 0;
  for (size_t k = n_train; k < order.size(); ++k) {
    const csda::Vec& x = *xs[order[k]];
    double z = b;
    for (size_t j = 0; j < dim; ++j) z += w[j] * x[j];
    double pred = z > 0.0 ? 1.0 : 0.0;
    if (pred == ys[order[k]]) ++correct;
    ++total;
  }
  out.probe_accuracy = total > 0 ? static_cast<double>(correct) / total : 0.5;
  return out;
}

}  // namespace pdat::eval
