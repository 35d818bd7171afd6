// Silhouette scoring for hard cluster assignments. Points labelled < 0
// (noise) are excluded; singleton-cluster points score 0.

#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <vector>

#include "cte/common.hpp"
#include "cte/tensor.hpp"

namespace cte {

// Mean over points of (b - a) / max(a, b), where a is the mean distance to
// the point's own cluster and b the smallest mean distance to another
// cluster. Computed by accumulating per-point distance sums per cluster.
// Optional per-point multiplicities make the score equal to the plain score
// on the expanded multiset (duplicates at distance zero).
inline double silhouette_score(const Tensor& x, const std::vector<int>& labels,
                               const std::vector<double>* weights = nullptr) {
  require(x.ndim() == 2, "silhouette_score: 2-D data required");
  const int n = x.dim(0);
  const int d = x.dim(1);
  require(static_cast<int>(labels.size()) == n,
          "silhouette_score: label count mismatch");
  if (weights) {
    require(static_cast<int>(weights->size()) == n,
            "silhouette_score: weight count mismatch");
  }

  // Compact the non-noise labels.
  std::map<int, int> compact;
  for (int i = 0; i < n; ++i) {
    if (labels[i] >= 0) compact.emplace(labels[i], 0);
  }
  int k = 0;
  for (auto& [label, idx] : compact) idx = k++;
  if (k < 2) {
    throw Error("silhouette_score: needs at least 2 clusters, got " +
                std::to_string(k));
  }

  std::vector<double> cluster_mass(k, 0.0);
  std::vector<int> point_cluster(n, -1);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0) continue;
    point_cluster[i] = compact[labels[i]];
    cluster_mass[point_cluster[i]] += weights ? (*weights)[i] : 1.0;
  }

  // sums[i][c] = total (weighted) distance from point i to cluster c.
  std::vector<double> sums(static_cast<std::size_t>(n) * k, 0.0);
  for (int i = 0; i < n; ++i) {
    if (point_cluster[i] < 0) continue;
    for (int j = i + 1; j < n; ++j) {
      if (point_cluster[j] < 0) continue;
      const double dist = euclidean(&x.v[static_cast<std::size_t>(i) * d],
                                    &x.v[static_cast<std::size_t>(j) * d], d);
      const double wi = weights ? (*weights)[i] : 1.0;
      const double wj = weights ? (*weights)[j] : 1.0;
      sums[static_cast<std::size_t>(i) * k + point_cluster[j]] += wj * dist;
      sums[static_cast<std::size_t>(j) * k + point_cluster[i]] += wi * dist;
    }
  }

  double total = 0.0;
  double mass = 0.0;
  for (int i = 0; i < n; ++i) {
    const int ci = point_cluster[i];
    if (ci < 0) continue;
    const double wi = weights ? (*weights)[i] : 1.0;
    mass += wi;
    // Own-cluster mean excludes the point itself. A true singleton
    // (own mass 1) scores 0; duplicates of a point sit at distance zero and
    // only enlarge the denominator, matching the expanded multiset.
    const double denom_own = cluster_mass[ci] - 1.0;
    double s = 0.0;
    if (denom_own > 1e-12) {
      const double a = sums[static_cast<std::size_t>(i) * k + ci] / denom_own;
      double b = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        if (c == ci || cluster_mass[c] <= 0.0) continue;
        b = std::min(b, sums[static_cast<std::size_t>(i) * k + c] /
                            cluster_mass[c]);
      }
      const double m = std::max(a, b);
      s = m > 0.0 ? (b - a) / m : 0.0;
    }
    total += wi * s;
  }
  require(mass > 0.0, "silhouette_score: no labelled points");
  return total / mass;
}

}  // namespace cte
