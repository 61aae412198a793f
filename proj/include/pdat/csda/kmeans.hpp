#ifndef PDAT_CSDA_KMEANS_HPP
#define PDAT_CSDA_KMEANS_HPP

#include <cstdint>
#include <vector>

namespace pdat::csda {

using Vec = std::vector<double>;

struct ClusterModel {
  int stage = 0;
  int num_clusters = 0;
  std::vector<Vec> centroids;
  double silhouette = 0.0;
  bool fallback = false;       // too few vectors for the full C range
  bool zero_variance = false;  // degenerate data (all points identical)
};

struct KMeansOptions {
  int restarts = 3;
  int max_iters = 50;
};

// Seeded k-means++ with restarts, best inertia wins. Fully deterministic
// for a fixed seed.
ClusterModel fit_kmeans(const std::vector<Vec>& vectors, int num_clusters, uint64_t seed,
                        const KMeansOptions& opts = {});

// Nearest centroid, Euclidean metric; equidistant ties go to the lower index.
std::vector<int> assign_labels(const ClusterModel& model, const std::vector<Vec>& vectors);

// Definitional mean silhouette coefficient; singleton clusters score 0.
double mean_silhouette(const std::vector<Vec>& vectors, const std::vector<int>& labels,
                       int num_clusters);

// Runs k-means for each C in [c_min, c_max], keeps the silhouette argmax
// (ties -> smaller C). Fewer than 2*c_max vectors falls back to C = 2 with
// the fallback flag set.
ClusterModel fit_clusters(const std::vector<Vec>& vectors, int c_min, int c_max, uint64_t seed,
                          const KMeansOptions& opts = {}, int stage = 0);

}  // namespace pdat::csda

#endif
