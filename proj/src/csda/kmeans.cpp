#include "pdat/csda/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "pdat/core/rng.hpp"

namespace pdat::csda {

namespace {

double sqdist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

int nearest(const std::vector<Vec>& centroids, const Vec& v) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < centroids.size(); ++c) {
    double d = sqdist(centroids[c], v);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

struct KMeansRun {
  std::vector<Vec> centroids;
  double inertia = std::numeric_limits<double>::infinity();
};

KMeansRun run_once(const std::vector<Vec>& vectors, int k, std::mt19937_64& rng,
                   int max_iters) {
  int n = static_cast<int>(vectors.size());
  size_t dim = vectors[0].size();

  // k-means++ seeding
  std::vector<Vec> centroids;
  std::uniform_int_distribution<int> first(0, n - 1);
  centroids.push_back(vectors[static_cast<size_t>(first(rng))]);
  std::vector<double> d2(static_cast<size_t>(n));
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, sqdist(c, vectors[static_cast<size_t>(i)]));
      d2[static_cast<size_t>(i)] = best;
      total += best;
    }
    if (total <= 0.0) {
      // all remaining points coincide with a centroid
      centroids.push_back(vectors[static_cast<size_t>(first(rng))]);
      continue;
    }
    std::uniform_real_distribution<double> pick(0.0, total);
    double r = pick(rng);
    int chosen = n - 1;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += d2[static_cast<size_t>(i)];
      if (acc >= r) {
        chosen = i;
        break;
      }
    }
    centroids.push_back(vectors[static_cast<size_t>(chosen)]);
  }

  std::vector<int> labels(static_cast<size_t>(n), -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int a = nearest(centroids, vectors[static_cast<size_t>(i)]);
      if (a != labels[static_cast<size_t>(i)]) {
        labels[static_cast<size_t>(i)] = a;
        changed = true;
      }
    }
    if (!changed && it > 0) break;
    std::vector<Vec> sums(static_cast<size_t>(k), Vec(dim, 0.0));
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      int a = labels[static_cast<size_t>(i)];
      ++counts[static_cast<size_t>(a)];
      for (size_t j = 0; j < dim; ++j) sums[static_cast<size_t>(a)][j] += vectors[static_cast<size_t>(i)][j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) continue;  // empty cluster keeps its centroid
      for (size_t j = 0; j < dim; ++j)
        centroids[static_cast<size_t>(c)][j] =
            sums[static_cast<size_t>(c)][j] / counts[static_cast<size_t>(c)];
    }
  }

  KMeansRun run;
  run.centroids = std::move(centroids);
  run.inertia = 0.0;
  for (int i = 0; i < n; ++i)
    run.inertia += sqdist(run.centroids[static_cast<size_t>(nearest(run.centroids, vectors[static_cast<size_t>(i)]))],
                          vectors[static_cast<size_t>(i)]);
  return run;
}

}  // namespace

ClusterModel fit_kmeans(const std::vector<Vec>& vectors, int num_clusters, uint64_t seed,
                        const KMeansOptions& opts) {
  if (vectors.empty()) throw std::invalid_argument("fit_kmeans: no vectors");
  if (num_clusters < 1 || num_clusters > static_cast<int>(vectors.size()))
    throw std::invalid_argument("fit_kmeans: bad cluster count");
  KMeansRun best;
  for (int r = 0; r < opts.restarts; ++r) {
    auto rng = pdat::make_rng(seed, "kmeans:" + std::to_string(num_clusters) + ":" + std::to_string(r));
    KMeansRun run = run_once(vectors, num_clusters, rng, opts.max_iters);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  ClusterModel model;
  model.num_clusters = num_clusters;
  model.centroids = std::move(best.centroids);
  return model;
}

std::vector<int> assign_labels(const ClusterModel& model, const std::vector<Vec>& vectors) {
  if (model.centroids.empty()) throw std::invalid_argument("assign_labels: unfitted model");
  std::vector<int> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(nearest(model.centroids, v));
  return out;
}

double mean_silhouette(const std::vector<Vec>& vectors, const std::vector<int>& labels,
                       int num_clusters) {
  int n = static_cast<int>(vectors.size());
  std::vector<int> counts(static_cast<size_t>(num_clusters), 0);
  for (int l : labels) ++counts[static_cast<size_t>(l)];

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    int li = labels[static_cast<size_t>(i)];
    if (counts[static_cast<size_t>(li)] <= 1) continue;  // singleton scores 0
    std::vector<double> mean_dist(static_cast<size_t>(num_clusters), 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_dist[static_cast<size_t>(labels[static_cast<size_t>(j)])] +=
          std::sqrt(sqdist(vectors[static_cast<size_t>(i)], vectors[static_cast<size_t>(j)]));
    }
    double a = mean_dist[static_cast<size_t>(li)] / (counts[static_cast<size_t>(li)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_clusters; ++c) {
      if (c == li || counts[static_cast<size_t>(c)] == 0) continue;
      b = std::min(b, mean_dist[static_cast<size_t>(c)] / counts[static_cast<size_t>(c)]);
    }
    if (!std::isfinite(b)) continue;  // only one non-empty cluster
    double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / n;
}

ClusterModel fit_clusters(const std::vector<Vec>& vectors, int c_min, int c_max, uint64_t seed,
                          const KMeansOptions& opts, int stage) {
  if (c_min < 2 || c_max < c_min) throw std::invalid_argument("fit_clusters: bad C range");
  if (vectors.size() < 2) throw std::invalid_argument("fit_clusters: need at least 2 vectors");

  bool degenerate = true;
  for (const auto& v : vectors)
    if (v != vectors[0]) {
      degenerate = false;
      break;
    }

  if (degenerate || static_cast<int>(vectors.size()) < 2 * c_max) {
    ClusterModel model = fit_kmeans(vectors, 2, seed, opts);
    model.stage = stage;
    model.fallback = true;
    model.zero_variance = degenerate;
    model.silhouette =
        degenerate ? 0.0 : mean_silhouette(vectors, assign_labels(model, vectors), 2);
    return model;
  }

  ClusterModel best;
  for (int c = c_min; c <= c_max; ++c) {
    ClusterModel model = fit_kmeans(vectors, c, seed, opts);
    model.stage = stage;
    model.silhouette = mean_silhouette(vectors, assign_labels(model, vectors), c);
    if (best.num_clusters == 0 || model.silhouette > best.silhouette) best = std::move(model);
  }
  return best;
}

}  // namespace pdat::csda
