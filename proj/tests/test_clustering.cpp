#include "cte/dbscan.hpp"
#include "cte/gmm.hpp"
#include "cte/silhouette.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "cte/rng.hpp"

namespace {

using namespace cte;

Tensor make_blobs(const std::vector<std::vector<double>>& centers,
                  int per_blob, double sigma, Rng& rng,
                  std::vector<int>* truth = nullptr) {
  const int d = static_cast<int>(centers[0].size());
  Tensor x({static_cast<int>(centers.size()) * per_blob, d});
  int row = 0;
  for (std::size_t b = 0; b < centers.size(); ++b) {
    for (int i = 0; i < per_blob; ++i) {
      for (int t = 0; t < d; ++t) {
        x.at(row, t) = centers[b][t] + sigma * rng.normal();
      }
      if (truth) truth->push_back(static_cast<int>(b));
      ++row;
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Brute-force DBSCAN oracle: core flags by pairwise counting, core
// components by union-find, border points attached to the earliest-discovered
// component with a core in range (the documented claiming rule).
// ---------------------------------------------------------------------------

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

std::vector<int> oracle_dbscan(const Tensor& x, double eps, int min_pts) {
  const int n = x.dim(0);
  const int d = x.dim(1);
  auto dist2 = [&](int i, int j) {
    double s = 0.0;
    for (int t = 0; t < d; ++t) {
      const double diff = x.at(i, t) - x.at(j, t);
      s += diff * diff;
    }
    return s;
  };
  const double e2 = eps * eps;
  std::vector<bool> core(n, false);
  for (int i = 0; i < n; ++i) {
    int count = 0;
    for (int j = 0; j < n; ++j) {
      if (dist2(i, j) <= e2) ++count;  // includes itself
    }
    core[i] = count >= min_pts;
  }
  UnionFind uf(n);
  for (int i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (int j = i + 1; j < n; ++j) {
      if (core[j] && dist2(i, j) <= e2) uf.unite(i, j);
    }
  }
  // Components ordered by minimal core index = discovery order.
  std::map<int, int> root_min;
  for (int i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const int r = uf.find(i);
    if (!root_min.count(r)) root_min[r] = i;
  }
  std::vector<std::pair<int, int>> order;  // (min index, root)
  for (const auto& [root, mn] : root_min) order.emplace_back(mn, root);
  std::sort(order.begin(), order.end());
  std::map<int, int> root_label;
  for (std::size_t i = 0; i < order.size(); ++i) {
    root_label[order[i].second] = static_cast<int>(i);
  }
  std::vector<int> labels(n, -1);
  for (int i = 0; i < n; ++i) {
    if (core[i]) labels[i] = root_label[uf.find(i)];
  }
  for (int i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (!core[j] || dist2(i, j) > e2) continue;
      const int lab = labels[j];
      if (best < 0 || lab < best) best = lab;
    }
    labels[i] = best;
  }
  return labels;
}

// Naive per-point silhouette oracle.
double oracle_silhouette(const Tensor& x, const std::vector<int>& labels) {
  const int n = x.dim(0);
  const int d = x.dim(1);
  std::set<int> ids;
  for (int l : labels) {
    if (l >= 0) ids.insert(l);
  }
  double total = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0) continue;
    ++count;
    std::map<int, std::pair<double, int>> acc;  // label -> (sum, n)
    for (int j = 0; j < n; ++j) {
      if (j == i || labels[j] < 0) continue;
      double s = 0.0;
      for (int t = 0; t < d; ++t) {
        const double diff = x.at(i, t) - x.at(j, t);
        s += diff * diff;
      }
      acc[labels[j]].first += std::sqrt(s);
      acc[labels[j]].second += 1;
    }
    int own_n = 0;
    for (int j = 0; j < n; ++j) {
      if (labels[j] == labels[i]) ++own_n;
    }
    if (own_n <= 1) continue;  // singleton scores 0
    const double a = acc[labels[i]].first / (own_n - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [lab, sn] : acc) {
      if (lab == labels[i]) continue;
      b = std::min(b, sn.first / sn.second);
    }
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / count;
}

// ---------------------------------------------------------------------------
// GMM
// ---------------------------------------------------------------------------

TEST(GmmFit, RecoversTwoSeparatedBlobs) {
  Rng rng(101);
  std::vector<int> truth;
  const Tensor x = make_blobs({{0, 0}, {10, 0}}, 60, 0.1, rng, &truth);
  const GmmModel m = gmm_fit(x, 2, 7);
  // Match fitted components to true centres.
  int comp0 = m.means.at(0, 0) < m.means.at(1, 0) ? 0 : 1;
  EXPECT_NEAR(m.means.at(comp0, 0), 0.0, 0.05);
  EXPECT_NEAR(m.means.at(comp0, 1), 0.0, 0.05);
  EXPECT_NEAR(m.means.at(1 - comp0, 0), 10.0, 0.05);
  EXPECT_NEAR(m.means.at(1 - comp0, 1), 0.0, 0.05);
  for (int i = 0; i < x.dim(0); ++i) {
    const int own = truth[i] == 0 ? comp0 : 1 - comp0;
    EXPECT_GT(m.responsibilities.at(i, own), 0.999);
  }
}

TEST(GmmFit, SingleComponentClosedForm) {
  Rng rng(5);
  Tensor x({40, 3});
  for (double& v : x.v) v = rng.uniform(-2, 2);
  const GmmModel m = gmm_fit(x, 1, 3);
  for (int t = 0; t < 3; ++t) {
    double mean = 0.0;
    for (int i = 0; i < 40; ++i) mean += x.at(i, t);
    mean /= 40.0;
    double var = 0.0;
    for (int i = 0; i < 40; ++i) {
      var += (x.at(i, t) - mean) * (x.at(i, t) - mean);
    }
    var /= 40.0;
    EXPECT_NEAR(m.means.at(0, t), mean, 1e-9);
    EXPECT_NEAR(m.variances.at(0, t), var, 1e-9);
  }
  EXPECT_NEAR(m.weights[0], 1.0, 1e-12);
}

TEST(GmmFit, LogLikelihoodMonotone) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(1000 + seed);
    const Tensor x = make_blobs({{0, 0}, {3, 3}, {-3, 4}}, 40, 0.7, rng);
    const GmmModel m = gmm_fit(x, 3, seed);
    ASSERT_EQ(m.reseed_warnings, 0);
    for (std::size_t i = 1; i < m.loglik_curve.size(); ++i) {
      EXPECT_GE(m.loglik_curve[i] - m.loglik_curve[i - 1], -1e-9)
          << "seed " << seed << " iteration " << i;
    }
    EXPECT_GE(m.loglik - m.loglik_curve.back(), -1e-9);
  }
}

TEST(GmmFit, ResponsibilityRowsSumToOne) {
  Rng rng(6);
  const Tensor x = make_blobs({{0, 0}, {4, 4}}, 30, 0.5, rng);
  const GmmModel m = gmm_fit(x, 2, 9);
  for (int i = 0; i < x.dim(0); ++i) {
    double sum = 0.0;
    for (int j = 0; j < m.k; ++j) sum += m.responsibilities.at(i, j);
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  double wsum = 0.0;
  for (double w : m.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-9);
  for (int j = 0; j < m.k; ++j) {
    for (int t = 0; t < m.dims; ++t) {
      EXPECT_GE(m.variances.at(j, t), kGmmVarianceFloor);
    }
  }
}

TEST(GmmFit, WeightedFitMatchesExpandedMultiset) {
  Rng rng(71);
  Tensor xu({6, 2});
  for (double& v : xu.v) v = rng.uniform(-1, 1);
  std::vector<double> mult = {3, 1, 2, 5, 1, 4};
  // Expanded data: duplicates in the same order.
  int total = 0;
  for (double m : mult) total += static_cast<int>(m);
  Tensor xf({total, 2});
  int row = 0;
  for (int i = 0; i < 6; ++i) {
    for (int r = 0; r < static_cast<int>(mult[i]); ++r) {
      xf.at(row, 0) = xu.at(i, 0);
      xf.at(row, 1) = xu.at(i, 1);
      ++row;
    }
  }
  const GmmModel mw = gmm_fit(xu, 1, 13, &mult);
  const GmmModel mf = gmm_fit(xf, 1, 13);
  for (int t = 0; t < 2; ++t) {
    EXPECT_NEAR(mw.means.at(0, t), mf.means.at(0, t), 1e-9);
    EXPECT_NEAR(mw.variances.at(0, t), mf.variances.at(0, t), 1e-9);
  }
  EXPECT_NEAR(mw.loglik, mf.loglik, 1e-6);
}

TEST(SelectKElbow, FindsThreeBlobs) {
  Rng rng(202);
  const Tensor x = make_blobs({{0, 0}, {8, 0}, {0, 8}}, 40, 0.3, rng);
  const KSelection sel = select_k_elbow(x, {1, 2, 3, 4, 5, 6, 7, 8}, 55);
  EXPECT_EQ(sel.chosen_k, 3);
}

TEST(SelectKElbow, SingleBlobPicksOne) {
  Rng rng(203);
  const Tensor x = make_blobs({{0, 0}}, 80, 0.5, rng);
  const KSelection sel = select_k_elbow(x, {1, 2, 3, 4}, 55);
  EXPECT_EQ(sel.chosen_k, 1);
}

// ---------------------------------------------------------------------------
// Silhouette
// ---------------------------------------------------------------------------

TEST(Silhouette, HandComputedTwoPairClusters) {
  Tensor x = Tensor::from({4, 2}, {0, 0, 1, 0, 100, 0, 101, 0});
  const std::vector<int> labels = {0, 0, 1, 1};
  // Hand evaluation: a = 1 for every point; b = mean distance to the other
  // pair. Exact expected value assembled from the definition.
  const double s00 = (100.5 - 1.0) / 100.5;
  const double s01 = (99.5 - 1.0) / 99.5;
  const double expected = 0.5 * (s00 + s01);  // symmetric across the pairs
  EXPECT_NEAR(silhouette_score(x, labels), expected, 1e-9);
  EXPECT_NEAR(silhouette_score(x, labels), 0.99, 1e-2);
}

TEST(Silhouette, RandomLabelsScoreNearZero) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(300 + seed);
    Tensor x({60, 2});
    for (double& v : x.v) v = rng.normal();
    std::vector<int> labels(60);
    for (auto& l : labels) l = static_cast<int>(rng.index(3));
    // Guard against a degenerate draw with < 2 distinct labels.
    labels[0] = 0;
    labels[1] = 1;
    EXPECT_LT(std::abs(silhouette_score(x, labels)), 0.1) << "seed " << seed;
  }
}

TEST(Silhouette, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(400 + seed);
    const int n = 20 + static_cast<int>(rng.index(60));
    Tensor x({n, 3});
    for (double& v : x.v) v = rng.uniform(-5, 5);
    std::vector<int> labels(n);
    for (auto& l : labels) {
      l = static_cast<int>(rng.index(4)) - 1;  // includes some noise (-1)
    }
    labels[0] = 0;
    labels[1] = 1;
    EXPECT_NEAR(silhouette_score(x, labels), oracle_silhouette(x, labels), 1e-9)
        << "seed " << seed;
  }
}

TEST(Silhouette, SingleClusterRejected) {
  Tensor x = Tensor::from({3, 1}, {0, 1, 2});
  EXPECT_THROW(silhouette_score(x, {0, 0, 0}), Error);
}

TEST(Silhouette, WeightedMatchesExpandedMultiset) {
  Rng rng(61);
  Tensor xu({5, 2});
  for (double& v : xu.v) v = rng.uniform(-3, 3);
  const std::vector<double> mult = {2, 3, 1, 4, 2};
  const std::vector<int> labels_u = {0, 0, 1, 1, 1};
  int total = 0;
  for (double m : mult) total += static_cast<int>(m);
  Tensor xf({total, 2});
  std::vector<int> labels_f;
  int row = 0;
  for (int i = 0; i < 5; ++i) {
    for (int r = 0; r < static_cast<int>(mult[i]); ++r) {
      xf.at(row, 0) = xu.at(i, 0);
      xf.at(row, 1) = xu.at(i, 1);
      labels_f.push_back(labels_u[i]);
      ++row;
    }
  }
  EXPECT_NEAR(silhouette_score(xu, labels_u, &mult),
              silhouette_score(xf, labels_f), 1e-9);
}

// ---------------------------------------------------------------------------
// DBSCAN
// ---------------------------------------------------------------------------

TEST(Dbscan, TwoBlobsNoNoise) {
  Rng rng(500);
  const Tensor x = make_blobs({{0, 0}, {10, 0}}, 40, 0.3, rng);
  const DbscanModel m = dbscan(x, 1.5, 4);
  EXPECT_EQ(m.num_clusters, 2);
  for (int l : m.labels) EXPECT_NE(l, kNoise);
}

TEST(Dbscan, AllIsolatedPointsAreNoise) {
  Tensor x({5, 1});
  for (int i = 0; i < 5; ++i) x.at(i, 0) = i * 100.0;
  const DbscanModel m = dbscan(x, 1.0, 2);
  EXPECT_EQ(m.num_clusters, 0);
  for (int l : m.labels) EXPECT_EQ(l, kNoise);
}

TEST(Dbscan, MatchesBruteForceOracleOnRandomSets) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(600 + seed);
    const int n = 50 + static_cast<int>(rng.index(451));  // up to 500
    const int d = 2 + static_cast<int>(rng.index(3));
    Tensor x({n, d});
    for (double& v : x.v) v = rng.uniform(0, 10);
    const double eps = rng.uniform(0.3, 1.5);
    const int min_pts = 2 + static_cast<int>(rng.index(6));
    const DbscanModel m = dbscan(x, eps, min_pts);
    const std::vector<int> want = oracle_dbscan(x, eps, min_pts);
    EXPECT_EQ(m.labels, want) << "seed " << seed << " n=" << n
                              << " eps=" << eps << " min_pts=" << min_pts;
  }
}

TEST(Dbscan, PartitionInvariantUnderPermutation) {
  Rng rng(700);
  std::vector<int> truth;
  const Tensor x = make_blobs({{0, 0}, {8, 8}, {-8, 8}}, 30, 0.4, rng, &truth);
  const int n = x.dim(0);
  const DbscanModel base = dbscan(x, 1.2, 4);

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng(800 + trial);
    shuffle_rng.shuffle(perm);
    Tensor xp({n, 2});
    for (int i = 0; i < n; ++i) {
      xp.at(i, 0) = x.at(perm[i], 0);
      xp.at(i, 1) = x.at(perm[i], 1);
    }
    const DbscanModel m = dbscan(xp, 1.2, 4);
    // Same partition up to relabelling.
    std::map<int, int> fwd;
    for (int i = 0; i < n; ++i) {
      const int a = base.labels[perm[i]];
      const int b = m.labels[i];
      EXPECT_EQ(a == kNoise, b == kNoise);
      if (a == kNoise) continue;
      auto it = fwd.find(a);
      if (it == fwd.end()) {
        fwd[a] = b;
      } else {
        EXPECT_EQ(it->second, b);
      }
    }
  }
}

TEST(Dbscan, WeightedMatchesExpandedMultiset) {
  Rng rng(81);
  Tensor xu({8, 2});
  for (double& v : xu.v) v = rng.uniform(0, 4);
  std::vector<double> mult = {1, 3, 2, 1, 5, 2, 1, 4};
  int total = 0;
  for (double m : mult) total += static_cast<int>(m);
  Tensor xf({total, 2});
  std::vector<int> owner;
  int row = 0;
  for (int i = 0; i < 8; ++i) {
    for (int r = 0; r < static_cast<int>(mult[i]); ++r) {
      xf.at(row, 0) = xu.at(i, 0);
      xf.at(row, 1) = xu.at(i, 1);
      owner.push_back(i);
      ++row;
    }
  }
  const DbscanModel mw = dbscan(xu, 1.0, 3, &mult);
  const DbscanModel mf = dbscan(xf, 1.0, 3);
  ASSERT_EQ(mw.num_clusters, mf.num_clusters);
  for (int i = 0; i < total; ++i) {
    EXPECT_EQ(mf.labels[i], mw.labels[owner[i]]);
  }
}

TEST(DbscanTune, ThreeBlobEmbeddingsRecovered) {
  Rng rng(900);
  const Tensor x = make_blobs({{0, 0}, {12, 0}, {0, 12}}, 50, 0.3, rng);
  std::vector<double> grid;
  for (double e = 0.2; e <= 3.0; e *= 1.3) grid.push_back(e);
  const DbscanTuneResult r = dbscan_tune(x, grid, {3, 5, 10});
  EXPECT_EQ(r.num_clusters, 3);
  EXPECT_GT(r.silhouette, 0.9);
  EXPECT_LE(r.noise_fraction, 0.10);
}

TEST(DbscanTune, DefaultGridHandlesTightClusters) {
  // The default eps grid (1st..50th percentile of NN distances) targets the
  // trained-embedding regime where same-cluster points sit very close.
  Rng rng(905);
  const Tensor x = make_blobs({{0, 0}, {12, 0}, {0, 12}}, 50, 0.02, rng);
  const auto grid = default_eps_grid(x);
  const DbscanTuneResult r = dbscan_tune(x, grid, {3, 5, 10});
  EXPECT_EQ(r.num_clusters, 3);
  EXPECT_GT(r.silhouette, 0.9);
}

TEST(DbscanTune, SingleBlobFailsWithDiagnostics) {
  Rng rng(901);
  const Tensor x = make_blobs({{0, 0}}, 60, 0.4, rng);
  EXPECT_THROW(dbscan_tune(x, default_eps_grid(x), {3, 5, 10}), TuningError);
}

TEST(AssignCluster, CorePointMapsToOwnCluster) {
  Rng rng(902);
  const Tensor x = make_blobs({{0, 0}, {10, 0}}, 30, 0.3, rng);
  const DbscanModel m = dbscan(x, 1.5, 4);
  ASSERT_GT(m.core_points.dim(0), 0);
  const int d = m.dims();
  for (int i = 0; i < m.core_points.dim(0); ++i) {
    EXPECT_EQ(assign_cluster(m, &m.core_points.v[static_cast<std::size_t>(i) * d]),
              m.core_labels[i]);
  }
}

TEST(AssignCluster, MidpointPrefersStrictlyNearerCore) {
  // Two mini clusters on a line; query nearer to the right one.
  Tensor x = Tensor::from({6, 1}, {0.0, 0.1, 0.2, 10.0, 10.1, 10.2});
  const DbscanModel m = dbscan(x, 0.3, 2);
  ASSERT_EQ(m.num_clusters, 2);
  const std::vector<double> q = {6.0};
  EXPECT_EQ(assign_cluster(m, q), m.labels[3]);
}

TEST(AssignCluster, ReproducesTrainingLabelsForNonNoise) {
  Rng rng(903);
  const Tensor x = make_blobs({{0, 0}, {9, 9}}, 40, 0.4, rng);
  const DbscanModel m = dbscan(x, 1.3, 4);
  const int d = m.dims();
  for (int i = 0; i < x.dim(0); ++i) {
    if (m.labels[i] == kNoise) continue;
    EXPECT_EQ(assign_cluster(m, &x.v[static_cast<std::size_t>(i) * d]),
              m.labels[i]);
  }
}

TEST(AssignCluster, NoCorePointsRejected) {
  Tensor x({4, 1});
  for (int i = 0; i < 4; ++i) x.at(i, 0) = i * 50.0;
  const DbscanModel m = dbscan(x, 1.0, 3);
  const std::vector<double> q = {1.0};
  EXPECT_THROW(assign_cluster(m, q), Error);
}

}  // namespace
