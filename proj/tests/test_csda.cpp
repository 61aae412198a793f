#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "pdat/csda/align.hpp"
#include "pdat/csda/descriptor.hpp"
#include "pdat/csda/kmeans.hpp"
#include "pdat/csda/lmmd.hpp"
#include "pdat/csda/memory.hpp"
#include "pdat/eval/probe.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace pdat;
using namespace pdat::csda;

namespace {

nn::Tensor randn(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
  nn::Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, scale);
  for (long long i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

std::vector<Vec> gaussian_blobs(int clusters, int per_cluster, int dim, double separation,
                                double sigma, std::mt19937_64& rng, std::vector<int>* truth) {
  std::vector<Vec> centers;
  std::normal_distribution<double> dir(0.0, 1.0);
  for (int c = 0; c < clusters; ++c) {
    Vec center(static_cast<size_t>(dim));
    double norm = 0.0;
    for (auto& v : center) {
      v = dir(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : center) v = v / norm * separation * (c + 1);
    centers.push_back(center);
  }
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<Vec> pts;
  for (int c = 0; c < clusters; ++c)
    for (int i = 0; i < per_cluster; ++i) {
      Vec p = centers[static_cast<size_t>(c)];
      for (auto& v : p) v += noise(rng);
      pts.push_back(p);
      if (truth) truth->push_back(c);
    }
  return pts;
}

Vec tensor_row(const nn::Tensor& t, int row) {
  Vec v(static_cast<size_t>(t.dim(1)));
  for (int j = 0; j < t.dim(1); ++j) v[static_cast<size_t>(j)] = t.at(row, j);
  return v;
}

nn::Var rows_leaf(const std::vector<Vec>& rows, bool grad = false) {
  nn::Tensor t({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      t.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return nn::Var::leaf(std::move(t), grad);
}

}  // namespace

TEST_CASE("correlation descriptor: unit norm, scale invariance, compositional oracle") {
  std::mt19937_64 rng(51);
  nn::Tensor zt = randn({2, 3, 3, 3}, rng);
  nn::Tensor xt = randn({2, 3, 6, 6}, rng);
  DescriptorBatch d = correlation_descriptor(nn::Var::leaf(zt), nn::Var::leaf(xt));

  for (int i = 0; i < 2; ++i) {
    double norm = 0.0;
    for (int j = 0; j < 3; ++j) norm += d.rows.val().at(i, j) * d.rows.val().at(i, j);
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_FALSE(d.zero_rows[static_cast<size_t>(i)]);
  }

  // scaling the search features leaves the descriptor unchanged
  nn::Tensor xs = xt;
  for (long long i = 0; i < xs.size(); ++i) xs[i] *= 5.0;
  DescriptorBatch d5 = correlation_descriptor(nn::Var::leaf(zt), nn::Var::leaf(xs));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(d.rows.val().at(i, j) == doctest::Approx(d5.rows.val().at(i, j)).epsilon(1e-12));

  // pool(correlate) then normalize, computed independently
  nn::Tensor resp = testsupport::xcorr_oracle(zt, xt);
  for (int n = 0; n < 2; ++n) {
    Vec pooled(3, 0.0);
    int hw = resp.dim(2) * resp.dim(3);
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int i = 0; i < resp.dim(2); ++i)
        for (int j = 0; j < resp.dim(3); ++j) s += resp.at(n, c, i, j);
      pooled[static_cast<size_t>(c)] = s / hw;
    }
    double norm = std::sqrt(pooled[0] * pooled[0] + pooled[1] * pooled[1] + pooled[2] * pooled[2]);
    for (int c = 0; c < 3; ++c)
      CHECK(testsupport::rel_err(d.rows.val().at(n, c), pooled[static_cast<size_t>(c)] / norm) <
            1e-6);
  }

  // all-zero response flags the row
  DescriptorBatch z = correlation_descriptor(nn::Var::leaf(nn::Tensor::zeros({1, 3, 3, 3})),
                                             nn::Var::leaf(randn({1, 3, 6, 6}, rng)));
  CHECK(z.zero_rows[0]);
  for (int j = 0; j < 3; ++j) CHECK(z.rows.val().at(0, j) == 0.0);
}

TEST_CASE("kmeans: determinism and label assignment rules") {
  std::mt19937_64 rng(52);
  std::vector<int> truth;
  auto pts = gaussian_blobs(3, 40, 4, 8.0, 1.0, rng, &truth);

  ClusterModel m1 = fit_kmeans(pts, 3, 99);
  ClusterModel m2 = fit_kmeans(pts, 3, 99);
  REQUIRE(m1.centroids.size() == m2.centroids.size());
  for (size_t c = 0; c < m1.centroids.size(); ++c)
    for (size_t j = 0; j < m1.centroids[c].size(); ++j)
      CHECK(m1.centroids[c][j] == m2.centroids[c][j]);  // bitwise

  // a centroid maps to its own index
  auto self_labels = assign_labels(m1, m1.centroids);
  for (size_t c = 0; c < m1.centroids.size(); ++c)
    CHECK(self_labels[c] == static_cast<int>(c));

  // equidistant point goes to the lower index
  ClusterModel mid;
  mid.num_clusters = 2;
  mid.centroids = {{0.0, 0.0}, {2.0, 0.0}};
  CHECK(assign_labels(mid, {{1.0, 0.0}})[0] == 0);

  // argmin-distance oracle
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 100; ++trial) {
    Vec p = {u(rng), u(rng), u(rng), u(rng)};
    int got = assign_labels(m1, {p})[0];
    int best = 0;
    double best_d = 1e300;
    for (size_t c = 0; c < m1.centroids.size(); ++c) {
      double d = 0;
      for (size_t j = 0; j < p.size(); ++j) {
        double v = p[j] - m1.centroids[c][j];
        d += v * v;
      }
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    CHECK(got == best);
  }
}

TEST_CASE("silhouette matches the definitional oracle") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> truth;
    int k = 2 + trial % 3;
    auto pts = gaussian_blobs(k, 15, 3, 6.0, 1.2, rng, &truth);
    ClusterModel m = fit_kmeans(pts, k, 7 + trial);
    auto labels = assign_labels(m, pts);
    double mine = mean_silhouette(pts, labels, k);
    double oracle = testsupport::silhouette_oracle(pts, labels, k);
    CHECK(testsupport::rel_err(mine, oracle) < 1e-6);
  }
}

TEST_CASE("fit_clusters: silhouette selection on separated blobs") {
  int hits = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::mt19937_64 rng(100 + trial);
    auto pts = gaussian_blobs(2, 100, 4, 8.0, 1.0, rng, nullptr);
    ClusterModel m = fit_clusters(pts, 2, 10, 1000 + trial);
    if (m.num_clusters == 2) ++hits;
  }
  CHECK(hits >= 19);
}

TEST_CASE("fit_clusters: fallback and degenerate flags") {
  std::vector<Vec> few(10, Vec{1.0, 2.0});
  few[1] = {3.0, 1.0};
  few[2] = {0.0, 5.0};
  ClusterModel fallback = fit_clusters(few, 2, 10, 5);
  CHECK(fallback.fallback);
  CHECK(fallback.num_clusters == 2);

  std::vector<Vec> identical(50, Vec{2.0, 2.0});
  ClusterModel degen = fit_clusters(identical, 2, 10, 5);
  CHECK(degen.fallback);
  CHECK(degen.zero_variance);
  CHECK(degen.num_clusters == 2);
}

TEST_CASE("align_stage_labels: identity, swap, exhaustive search") {
  std::vector<int> ref = {0, 0, 1, 1, 2, 2, 0, 1, 2};

  auto identity = align_stage_labels(ref, ref, 3);
  CHECK(identity.permutation == std::vector<int>({0, 1, 2}));
  CHECK(identity.relabeled == ref);

  std::vector<int> swapped = ref;
  for (auto& l : swapped) l = l == 0 ? 1 : (l == 1 ? 0 : l);
  auto fixed = align_stage_labels(ref, swapped, 3);
  CHECK(fixed.relabeled == ref);

  // exhaustive permutation search for C <= 5 on random fixtures
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 30; ++trial) {
    int c = 2 + static_cast<int>(rng() % 4);
    int n = 40;
    std::vector<int> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<size_t>(i)] = static_cast<int>(rng() % static_cast<uint64_t>(c));
      b[static_cast<size_t>(i)] = static_cast<int>(rng() % static_cast<uint64_t>(c));
    }
    auto result = align_stage_labels(a, b, c);
    long long got = 0;
    for (int i = 0; i < n; ++i)
      if (result.relabeled[static_cast<size_t>(i)] == a[static_cast<size_t>(i)]) ++got;

    // brute force over all permutations
    std::vector<int> perm(static_cast<size_t>(c));
    for (int i = 0; i < c; ++i) perm[static_cast<size_t>(i)] = i;
    long long best = -1;
    do {
      long long agree = 0;
      for (int i = 0; i < n; ++i)
        if (perm[static_cast<size_t>(b[static_cast<size_t>(i)])] == a[static_cast<size_t>(i)])
          ++agree;
      best = std::max(best, agree);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == best);
  }

  CHECK_THROWS(align_stage_labels({0, 1}, {0}, 2));
}

TEST_CASE("vote_labels: rule examples and brute-force scorer") {
  std::vector<double> weights = {1, 2, 3, 4};
  CHECK(vote_label({1, 1, 0, 0}, weights) == 0);  // 7 vs 3
  CHECK(vote_label({0, 1, 1, 0}, weights) == 0);  // 5 vs 5, stage-4 breaks it
  CHECK(vote_label({2, 2, 2, 2}, weights) == 2);  // unanimity

  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> labels(4);
    for (auto& l : labels) l = static_cast<int>(rng() % 5);
    CHECK(vote_label(labels, weights) == testsupport::vote_oracle(labels, weights));
  }
}

TEST_CASE("lmmd_weights: normalized one-hot rows") {
  auto w0 = lmmd_weights({0, 0, 1}, 0);
  REQUIRE(w0.size() == 3);
  CHECK(w0[0] == doctest::Approx(0.5));
  CHECK(w0[1] == doctest::Approx(0.5));
  CHECK(w0[2] == 0.0);

  auto w1 = lmmd_weights({0, 0, 1}, 1);
  CHECK(w1[2] == doctest::Approx(1.0));

  CHECK(lmmd_weights({2, 2, 2}, 0).empty());  // absent marker
}

TEST_CASE("kernel_matrix: self-similarity, fixed-ratio value, degeneracy") {
  KernelConfig cfg;
  cfg.multipliers = {1.0};

  // corners of the unit square: median distance 1, one pair at sqrt(2)
  std::vector<Vec> a = {{0, 0}, {1, 0}};
  std::vector<Vec> b = {{0, 1}, {1, 1}};
  KernelMatrix km = kernel_matrix(rows_leaf(a), rows_leaf(b), cfg);
  CHECK(km.sigma == doctest::Approx(1.0));
  CHECK(km.k.val().at(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));  // d^2 = 2 sigma^2

  // k(x, x) = 1 on the diagonal of a self-kernel; symmetric; entries in (0,1]
  std::mt19937_64 rng(56);
  nn::Var self_rows = nn::Var::leaf(randn({5, 3}, rng));
  KernelConfig multi;
  KernelMatrix self_km = kernel_matrix(self_rows, self_rows, multi);
  for (int i = 0; i < 5; ++i) {
    CHECK(self_km.k.val().at(i, i) == doctest::Approx(1.0));
    for (int j = 0; j < 5; ++j) {
      CHECK(self_km.k.val().at(i, j) == doctest::Approx(self_km.k.val().at(j, i)));
      CHECK(self_km.k.val().at(i, j) > 0.0);
      CHECK(self_km.k.val().at(i, j) <= 1.0);
    }
  }

  std::vector<Vec> same = {{1, 1}, {1, 1}};
  KernelMatrix degen = kernel_matrix(rows_leaf(same), rows_leaf(same), cfg);
  CHECK(degen.degenerate_sigma);
  CHECK(degen.sigma == 1.0);
}

TEST_CASE("lmmd_loss: identities and the definitional triple-sum oracle") {
  KernelConfig cfg;
  std::mt19937_64 rng(57);

  // identical features and labels vanish
  std::vector<Vec> feats;
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) {
    feats.push_back(tensor_row(randn({1, 4}, rng), 0));
    labels.push_back(i % 2);
  }
  LmmdResult same = lmmd_loss(rows_leaf(feats), rows_leaf(feats), labels, labels, 2, cfg);
  CHECK(std::abs(same.loss.item()) <= 1e-9);
  CHECK(same.classes_used == 2);

  // two singletons, same class, single bandwidth: expands to 2 - 2 k(s,t)
  KernelConfig single;
  single.multipliers = {1.0};
  std::vector<Vec> s = {{0.0, 0.0}};
  std::vector<Vec> t = {{1.5, 0.5}};
  LmmdResult pairres = lmmd_loss(rows_leaf(s), rows_leaf(t), {0}, {0}, 1, single);
  double sigma = testsupport::median_distance_oracle(s, t);
  double k_st = testsupport::rbf_oracle(s[0], t[0], sigma, single.multipliers);
  CHECK(pairres.loss.item() == doctest::Approx(2.0 - 2.0 * k_st).epsilon(1e-9));
  CHECK(pairres.loss.item() >= 0.0);

  // random instances vs the oracle; non-negativity; permutation invariance
  std::uniform_int_distribution<int> ln(2, 8);
  std::uniform_int_distribution<int> ld(1, 4);
  std::uniform_int_distribution<int> lc(1, 3);
  for (int trial = 0; trial < 40; ++trial) {
    int ns = ln(rng), nt = ln(rng), d = ld(rng), c = lc(rng);
    std::vector<Vec> fs, ft;
    std::vector<int> ls, lt;
    for (int i = 0; i < ns; ++i) {
      fs.push_back(tensor_row(randn({1, d}, rng), 0));
      ls.push_back(static_cast<int>(rng() % static_cast<uint64_t>(c)));
    }
    for (int i = 0; i < nt; ++i) {
      ft.push_back(tensor_row(randn({1, d}, rng), 0));
      lt.push_back(static_cast<int>(rng() % static_cast<uint64_t>(c)));
    }
    LmmdResult res = lmmd_loss(rows_leaf(fs), rows_leaf(ft), ls, lt, c, cfg);
    double oracle = testsupport::lmmd_oracle(fs, ft, ls, lt, c, cfg.multipliers);
    if (res.skipped) {
      CHECK(oracle == 0.0);
      continue;
    }
    CHECK(testsupport::rel_err(res.loss.item(), oracle) < 1e-6);
    CHECK(res.loss.item() >= -1e-9);

    // common permutation within each domain
    std::vector<size_t> perm(static_cast<size_t>(ns));
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vec> fs_p;
    std::vector<int> ls_p;
    for (size_t i : perm) {
      fs_p.push_back(fs[i]);
      ls_p.push_back(ls[i]);
    }
    LmmdResult res_p = lmmd_loss(rows_leaf(fs_p), rows_leaf(ft), ls_p, lt, c, cfg);
    CHECK(res_p.loss.item() == doctest::Approx(res.loss.item()).epsilon(1e-9));
  }

  // single-class LMMD reduces to the unweighted squared MMD
  for (int trial = 0; trial < 10; ++trial) {
    int ns = ln(rng), nt = ln(rng);
    std::vector<Vec> fs, ft;
    for (int i = 0; i < ns; ++i) fs.push_back(tensor_row(randn({1, 3}, rng), 0));
    for (int i = 0; i < nt; ++i) ft.push_back(tensor_row(randn({1, 3}, rng), 0));
    std::vector<int> ls(static_cast<size_t>(ns), 0), lt(static_cast<size_t>(nt), 0);
    LmmdResult res = lmmd_loss(rows_leaf(fs), rows_leaf(ft), ls, lt, 1, cfg);
    double mmd = eval::squared_mmd(fs, ft, cfg);
    CHECK(testsupport::rel_err(res.loss.item(), mmd) < 1e-7);
  }

  // C' = 0 skips with a zero loss
  LmmdResult skip = lmmd_loss(rows_leaf({{0.0, 0.0}}), rows_leaf({{1.0, 1.0}}), {0}, {1}, 2, cfg);
  CHECK(skip.skipped);
  CHECK(skip.loss.item() == 0.0);

  // gradients flow to the features: a small step along -grad lowers the
  // loss (the bandwidth itself is a constant wrt gradients, so a finite
  // difference through the median is not the comparison to make)
  nn::Var fs_var = rows_leaf({{0.1, 0.4}, {0.3, -0.2}}, true);
  nn::Var ft_var = rows_leaf({{0.9, -0.5}, {-0.3, 0.8}}, true);
  LmmdResult before = lmmd_loss(fs_var, ft_var, {0, 1}, {0, 1}, 2, cfg);
  fs_var.node()->zero_grad();
  ft_var.node()->zero_grad();
  nn::backward(before.loss);
  double gnorm = 0.0;
  for (auto* v : {&fs_var, &ft_var})
    for (long long i = 0; i < v->val().size(); ++i) {
      gnorm += v->grad()[i] * v->grad()[i];
      v->val()[i] -= 1e-3 * v->grad()[i];
    }
  CHECK(gnorm > 0.0);
  LmmdResult after = lmmd_loss(fs_var, ft_var, {0, 1}, {0, 1}, 2, cfg);
  CHECK(after.loss.item() < before.loss.item());
}

TEST_CASE("descriptor memory and cluster bank round trip") {
  std::mt19937_64 rng(58);
  DescriptorMemory mem(8);
  for (int i = 0; i < 12; ++i) {
    MemoryEntry e;
    e.sample_id = "s" + std::to_string(i);
    e.domain = i % 2 == 0 ? data::Domain::source : data::Domain::target;
    for (auto& d : e.desc) d = tensor_row(randn({1, 4}, rng), 0);
    mem.push(e);
  }
  CHECK(mem.size(data::Domain::source) == 6);
  CHECK(mem.size(data::Domain::target) == 6);
  // rolling window keeps the newest entries
  CHECK(mem.entries(data::Domain::source).front().sample_id == "s0");

  DescriptorMemory big(64);
  // two well-separated descriptor clusters across both domains
  for (int i = 0; i < 48; ++i) {
    MemoryEntry e;
    e.sample_id = "p" + std::to_string(i);
    e.domain = i % 2 == 0 ? data::Domain::source : data::Domain::target;
    double base = (i / 2) % 2 == 0 ? 4.0 : -4.0;
    for (auto& d : e.desc) {
      d = tensor_row(randn({1, 4}, rng, 0.3), 0);
      d[0] += base;
    }
    big.push(e);
  }
  ClusterBankConfig cfg;
  cfg.c_min = 2;
  cfg.c_max = 4;
  ClusterBank bank(cfg);
  RefitLog log = bank.refit(big, 17);
  CHECK(bank.ready());
  CHECK(log.selected_c == 2);
  CHECK(log.histogram_source.size() == 2);

  // voting over memory entries is consistent with the bank state
  std::vector<std::array<Vec, 4>> descs;
  for (const auto& e : big.entries(data::Domain::source)) descs.push_back(e.desc);
  auto labels = bank.voted_labels(descs);
  CHECK(labels.size() == descs.size());

  // serialization round-trips bank and memory
  std::stringstream ss;
  big.save(ss);
  bank.save(ss);
  DescriptorMemory mem2(64);
  ClusterBank bank2(cfg);
  mem2.load(ss);
  bank2.load(ss);
  CHECK(mem2.total() == big.total());
  auto labels2 = bank2.voted_labels(descs);
  CHECK(labels == labels2);
}
