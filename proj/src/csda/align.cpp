#include "pdat/csda/align.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace pdat::csda {

std::vector<int> hungarian_min(const std::vector<std::vector<double>>& cost) {
  int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  for (const auto& row : cost)
    if (static_cast<int>(row.size()) != n)
      throw std::invalid_argument("hungarian_min: matrix must be square");

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      int i0 = p[static_cast<size_t>(j0)], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        double cur = cost[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                     u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] > 0) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

Alignment align_stage_labels(const std::vector<int>& reference_labels,
                             const std::vector<int>& other_labels, int num_clusters) {
  if (reference_labels.size() != other_labels.size())
    throw std::invalid_argument("align_stage_labels: label lists cover different samples");
  for (int l : reference_labels)
    if (l < 0 || l >= num_clusters)
      throw std::invalid_argument("align_stage_labels: reference label out of range");
  for (int l : other_labels)
    if (l < 0 || l >= num_clusters)
      throw std::invalid_argument("align_stage_labels: other label out of range");

  std::vector<std::vector<double>> cooc(
      static_cast<size_t>(num_clusters), std::vector<double>(static_cast<size_t>(num_clusters), 0.0));
  for (size_t i = 0; i < other_labels.size(); ++i)
    cooc[static_cast<size_t>(other_labels[i])][static_cast<size_t>(reference_labels[i])] += 1.0;

  // maximize agreement == minimize negated co-occurrence
  std::vector<std::vector<double>> cost = cooc;
  for (auto& row : cost)
    for (auto& c : row) c = -c;

  Alignment out;
  out.permutation = hungarian_min(cost);
  out.relabeled.reserve(other_labels.size());
  for (int l : other_labels)
    out.relabeled.push_back(out.permutation[static_cast<size_t>(l)]);
  return out;
}

int vote_label(const std::vector<int>& per_stage_labels, const std::vector<double>& weights) {
  if (per_stage_labels.size() != weights.size())
    throw std::invalid_argument("vote_label: stage/weight count mismatch");
  int max_label = 0;
  for (int l : per_stage_labels) max_label = std::max(max_label, l);
  std::vector<double> score(static_cast<size_t>(max_label) + 1, 0.0);
  for (size_t m = 0; m < per_stage_labels.size(); ++m)
    score[static_cast<size_t>(per_stage_labels[m])] += weights[m];

  double best = *std::max_element(score.begin(), score.end());
  int last_stage_label = per_stage_labels.back();
  if (score[static_cast<size_t>(last_stage_label)] == best) return last_stage_label;
  for (size_t c = 0; c < score.size(); ++c)
    if (score[c] == best) return static_cast<int>(c);
  return last_stage_label;  // unreachable
}

std::vector<int> vote_labels(const std::vector<std::vector<int>>& per_sample_stage_labels,
                             const std::vector<double>& weights) {
  std::vector<int> out;
  out.reserve(per_sample_stage_labels.size());
  for (const auto& labels : per_sample_stage_labels) out.push_back(vote_label(labels, weights));
  return out;
}

}  // namespace pdat::csda
