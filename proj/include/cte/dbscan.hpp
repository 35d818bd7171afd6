// DBSCAN over embedding vectors with standard core/border/noise semantics,
// a silhouette-driven hyperparameter sweep, and nearest-core assignment for
// unseen points. Duplicate inputs can be collapsed with multiplicities; the
// weighted run is equivalent to running on the expanded multiset.

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <vector>

#include "cte/common.hpp"
#include "cte/silhouette.hpp"
#include "cte/tensor.hpp"

namespace cte {

inline constexpr int kNoise = -1;

struct DbscanModel {
  double eps = 0.0;
  int min_pts = 0;
  int num_clusters = 0;
  std::vector<int> labels;   // per input point; kNoise for noise
  Tensor core_points;        // M x d
  std::vector<int> core_labels;

  int dims() const { return core_points.ndim() == 2 ? core_points.dim(1) : 0; }
};

// Standard DBSCAN, Euclidean metric. A point is core iff its eps-ball holds
// at least min_pts points counting itself (by multiplicity when weights are
// given). Cluster ids are assigned in first-discovery order over the input.
inline DbscanModel dbscan(const Tensor& x, double eps, int min_pts,
                          const std::vector<double>* multiplicities = nullptr) {
  require(x.ndim() == 2, "dbscan: 2-D data required");
  require(eps > 0.0, "dbscan: eps must be positive");
  require(min_pts >= 1, "dbscan: min_pts must be >= 1");
  const int n = x.dim(0);
  const int d = x.dim(1);
  if (multiplicities) {
    require(static_cast<int>(multiplicities->size()) == n,
            "dbscan: multiplicity count mismatch");
  }

  const double eps2 = eps * eps;
  std::vector<std::vector<int>> neigh(n);
  std::vector<double> ball_mass(n, 0.0);
  for (int i = 0; i < n; ++i) {
    ball_mass[i] += multiplicities ? (*multiplicities)[i] : 1.0;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (squared_distance(&x.v[static_cast<std::size_t>(i) * d],
                           &x.v[static_cast<std::size_t>(j) * d], d) <= eps2) {
        neigh[i].push_back(j);
        neigh[j].push_back(i);
        ball_mass[i] += multiplicities ? (*multiplicities)[j] : 1.0;
        ball_mass[j] += multiplicities ? (*multiplicities)[i] : 1.0;
      }
    }
  }

  std::vector<bool> core(n);
  for (int i = 0; i < n; ++i) core[i] = ball_mass[i] >= min_pts;

  DbscanModel model;
  model.eps = eps;
  model.min_pts = min_pts;
  model.labels.assign(n, kNoise);
  int next = 0;
  std::deque<int> queue;
  for (int i = 0; i < n; ++i) {
    if (!core[i] || model.labels[i] != kNoise) continue;
    const int cluster = next++;
    model.labels[i] = cluster;
    queue.assign(neigh[i].begin(), neigh[i].end());
    while (!queue.empty()) {
      const int j = queue.front();
      queue.pop_front();
      if (model.labels[j] != kNoise) continue;
      model.labels[j] = cluster;
      if (core[j]) {
        for (int q : neigh[j]) {
          if (model.labels[q] == kNoise) queue.push_back(q);
        }
      }
    }
  }
  model.num_clusters = next;

  int n_core = 0;
  for (int i = 0; i < n; ++i) n_core += core[i] ? 1 : 0;
  model.core_points = Tensor({n_core, d});
  model.core_labels.reserve(n_core);
  int row = 0;
  for (int i = 0; i < n; ++i) {
    if (!core[i]) continue;
    std::copy(&x.v[static_cast<std::size_t>(i) * d],
              &x.v[static_cast<std::size_t>(i) * d] + d,
              &model.core_points.v[static_cast<std::size_t>(row) * d]);
    model.core_labels.push_back(model.labels[i]);
    ++row;
  }
  return model;
}

// Cluster of the nearest core point (Euclidean; smaller index wins ties).
inline int assign_cluster(const DbscanModel& model, const double* x) {
  const int m = model.core_points.ndim() == 2 ? model.core_points.dim(0) : 0;
  require(m > 0, "assign_cluster: model has no core points");
  const int d = model.dims();
  int best = 0;
  double best_d2 = squared_distance(x, model.core_points.v.data(), d);
  for (int i = 1; i < m; ++i) {
    const double d2 = squared_distance(
        x, &model.core_points.v[static_cast<std::size_t>(i) * d], d);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return model.core_labels[best];
}

inline int assign_cluster(const DbscanModel& model,
                          const std::vector<double>& x) {
  require(static_cast<int>(x.size()) == model.dims(),
          "assign_cluster: dimension mismatch");
  return assign_cluster(model, x.data());
}

struct DbscanTuneResult {
  DbscanModel model;
  double silhouette = 0.0;
  int num_clusters = 0;
  double noise_fraction = 0.0;
  struct GridPoint {
    double eps;
    int min_pts;
    int clusters;
    double noise_fraction;
    double silhouette;  // NaN when < 2 clusters
  };
  std::vector<GridPoint> grid;
};

// Default eps grid: 20 log-spaced values between the 1st and 50th percentile
// of nearest-neighbour distances.
inline std::vector<double> default_eps_grid(const Tensor& x,
                                            const std::vector<double>* multiplicities = nullptr,
                                            int count = 20) {
  const int n = x.dim(0);
  const int d = x.dim(1);
  require(n >= 2, "default_eps_grid: need at least 2 points");
  std::vector<double> nn;
  nn.reserve(n);
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      best = std::min(best, squared_distance(&x.v[static_cast<std::size_t>(i) * d],
                                             &x.v[static_cast<std::size_t>(j) * d], d));
    }
    double v = std::sqrt(best);
    // Duplicated points have themselves as nearest neighbour.
    if (multiplicities && (*multiplicities)[i] > 1.0) v = 0.0;
    nn.push_back(v);
  }
  std::sort(nn.begin(), nn.end());
  auto pct = [&](double q) {
    const double idx = q * (nn.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, nn.size() - 1);
    return nn[lo] + (idx - lo) * (nn[hi] - nn[lo]);
  };
  double lo = pct(0.01), hi = pct(0.50);
  // Keep the grid usable when small percentiles collapse to zero.
  const double floor = std::max(1e-9, 1e-4 * nn.back());
  lo = std::max(lo, floor);
  hi = std::max(hi, lo * 2.0);
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return grid;
}

// Sweeps (eps, min_pts), keeping settings with >= 2 clusters and noise
// fraction <= 10%, and returns the best silhouette over non-noise points.
inline DbscanTuneResult dbscan_tune(const Tensor& x,
                                    const std::vector<double>& eps_grid,
                                    const std::vector<int>& min_pts_grid,
                                    const std::vector<double>* multiplicities = nullptr,
                                    double max_noise_fraction = 0.10) {
  require(!eps_grid.empty() && !min_pts_grid.empty(),
          "dbscan_tune: empty hyperparameter grid");
  const int n = x.dim(0);
  double total_mass = 0.0;
  for (int i = 0; i < n; ++i) {
    total_mass += multiplicities ? (*multiplicities)[i] : 1.0;
  }

  DbscanTuneResult best;
  bool found = false;
  for (double eps : eps_grid) {
    for (int mp : min_pts_grid) {
      DbscanModel m = dbscan(x, eps, mp, multiplicities);
      DbscanTuneResult::GridPoint gp;
      gp.eps = eps;
      gp.min_pts = mp;
      gp.clusters = m.num_clusters;
      double noise_mass = 0.0;
      for (int i = 0; i < n; ++i) {
        if (m.labels[i] == kNoise) {
          noise_mass += multiplicities ? (*multiplicities)[i] : 1.0;
        }
      }
      gp.noise_fraction = noise_mass / total_mass;
      gp.silhouette = std::numeric_limits<double>::quiet_NaN();
      if (m.num_clusters >= 2) {
        gp.silhouette = silhouette_score(x, m.labels, multiplicities);
        if (gp.noise_fraction <= max_noise_fraction &&
            (!found || gp.silhouette > best.silhouette)) {
          best.model = std::move(m);
          best.silhouette = gp.silhouette;
          best.num_clusters = gp.clusters;
          best.noise_fraction = gp.noise_fraction;
          found = true;
        }
      }
      best.grid.push_back(gp);
    }
  }
  if (!found) {
    std::ostringstream msg;
    msg << "dbscan_tune: no grid point produced >= 2 clusters with noise <= "
        << max_noise_fraction * 100 << "% (tried " << best.grid.size()
        << " settings; cluster counts ranged ";
    int lo = best.grid.empty() ? 0 : best.grid.front().clusters, hi = lo;
    for (const auto& gp : best.grid) {
      lo = std::min(lo, gp.clusters);
      hi = std::max(hi, gp.clusters);
    }
    msg << lo << ".." << hi << ")";
    throw TuningError(msg.str());
  }
  return best;
}

}  // namespace cte
