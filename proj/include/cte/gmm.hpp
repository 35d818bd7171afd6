// Diagonal-covariance Gaussian mixture fitting by EM with k-means++ style
// seeding, plus BIC/silhouette model selection. Inputs may carry integer
// multiplicities (weights); the weighted fit equals the fit of the expanded
// multiset, which keeps tile corpora with heavy duplication cheap.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "cte/common.hpp"
#include "cte/rng.hpp"
#include "cte/silhouette.hpp"
#include "cte/tensor.hpp"

namespace cte {

inline constexpr double kGmmVarianceFloor = 1e-6;

struct GmmModel {
  int k = 0;
  int dims = 0;
  std::vector<double> weights;  // K, sums to 1
  Tensor means;                 // K x d
  Tensor variances;             // K x d, floored
  Tensor responsibilities;      // N x K, rows sum to 1
  std::vector<int> assignments; // argmax responsibility per point
  double loglik = 0.0;
  std::vector<double> loglik_curve;
  int reseed_warnings = 0;

  // Log density of one point under the mixture; also fills per-component
  // joint log densities when `joint` is non-null.
  double log_density(const double* x, std::vector<double>* joint = nullptr) const {
    static constexpr double kLog2Pi = 1.8378770664093453;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> local(k);
    for (int j = 0; j < k; ++j) {
      double lp = std::log(std::max(weights[j], 1e-300));
      for (int t = 0; t < dims; ++t) {
        const double var = variances.at(j, t);
        const double diff = x[t] - means.at(j, t);
        lp -= 0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
      }
      local[j] = lp;
      best = std::max(best, lp);
    }
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(local[j] - best);
    if (joint) *joint = local;
    return best + std::log(sum);
  }

  // Responsibilities of an arbitrary point.
  std::vector<double> posterior(const double* x) const {
    std::vector<double> joint;
    const double lse = log_density(x, &joint);
    std::vector<double> post(k);
    for (int j = 0; j < k; ++j) post[j] = std::exp(joint[j] - lse);
    return post;
  }
};

namespace detail {

inline std::vector<int> kmeanspp_seed(const Tensor& x,
                                      const std::vector<double>& w, int k,
                                      Rng& rng) {
  const int n = x.dim(0);
  const int d = x.dim(1);
  std::vector<int> centers;
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  // First centre: weighted-uniform draw.
  double total_w = 0.0;
  for (double v : w) total_w += v;
  auto weighted_draw = [&](const std::vector<double>& mass, double total) {
    double u = rng.uniform() * total;
    for (int i = 0; i < n; ++i) {
      u -= mass[i];
      if (u < 0.0) return i;
    }
    return n - 1;
  };
  centers.push_back(weighted_draw(w, total_w));
  while (static_cast<int>(centers.size()) < k) {
    const int last = centers.back();
    std::vector<double> mass(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i],
                           squared_distance(&x.v[static_cast<std::size_t>(i) * d],
                                            &x.v[static_cast<std::size_t>(last) * d], d));
      mass[i] = w[i] * min_d2[i];
      total += mass[i];
    }
    centers.push_back(total > 0.0 ? weighted_draw(mass, total)
                                  : static_cast<int>(rng.index(n)));
  }
  return centers;
}

}  // namespace detail

// EM fit with diagonal covariances. Stops when the log-likelihood improves
// by less than `tol` or after `max_iter` iterations. Components that lose
// all responsibility mass are reseeded at a random data point (counted in
// reseed_warnings).
inline GmmModel gmm_fit(const Tensor& x, int k, std::uint64_t seed,
                        const std::vector<double>* multiplicities = nullptr,
                        int max_iter = 500, double tol = 1e-6) {
  require(x.ndim() == 2, "gmm_fit: 2-D data required");
  const int n = x.dim(0);
  const int d = x.dim(1);
  require(k >= 1, "gmm_fit: K must be >= 1");
  require(n > k, "gmm_fit: need N > K");

  std::vector<double> w(n, 1.0);
  if (multiplicities) {
    require(static_cast<int>(multiplicities->size()) == n,
            "gmm_fit: multiplicity count mismatch");
    w = *multiplicities;
  }
  double total_w = 0.0;
  for (double v : w) total_w += v;

  // Global per-dimension variance, the reseeding fallback scale.
  std::vector<double> global_mean(d, 0.0), global_var(d, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < d; ++t) {
      global_mean[t] += w[i] * x.at(i, t);
    }
  }
  for (int t = 0; t < d; ++t) global_mean[t] /= total_w;
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < d; ++t) {
      const double diff = x.at(i, t) - global_mean[t];
      global_var[t] += w[i] * diff * diff;
    }
  }
  for (int t = 0; t < d; ++t) {
    global_var[t] = std::max(global_var[t] / total_w, kGmmVarianceFloor);
  }

  GmmModel m;
  m.k = k;
  m.dims = d;
  m.weights.assign(k, 1.0 / k);
  m.means = Tensor({k, d});
  m.variances = Tensor({k, d});
  m.responsibilities = Tensor({n, k});

  Rng rng(derive_seed(seed, "gmm_fit"));
  const auto centers = detail::kmeanspp_seed(x, w, k, rng);
  for (int j = 0; j < k; ++j) {
    for (int t = 0; t < d; ++t) {
      m.means.at(j, t) = x.at(centers[j], t);
      m.variances.at(j, t) = global_var[t];
    }
  }

  double prev_ll = -std::numeric_limits<double>::infinity();
  std::vector<double> joint(k);
  for (int iter = 0; iter < max_iter; ++iter) {
    // E step.
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lse = m.log_density(&x.v[static_cast<std::size_t>(i) * d], &joint);
      ll += w[i] * lse;
      for (int j = 0; j < k; ++j) {
        m.responsibilities.at(i, j) = std::exp(joint[j] - lse);
      }
    }
    m.loglik = ll;
    m.loglik_curve.push_back(ll);

    // M step with reseeding of empty components.
    bool reseeded = false;
    for (int j = 0; j < k; ++j) {
      double mass = 0.0;
      for (int i = 0; i < n; ++i) mass += w[i] * m.responsibilities.at(i, j);
      if (mass < 1e-10) {
        const int pick = static_cast<int>(rng.index(n));
        for (int t = 0; t < d; ++t) {
          m.means.at(j, t) = x.at(pick, t);
          m.variances.at(j, t) = global_var[t];
        }
        m.weights[j] = 1.0 / total_w;
        ++m.reseed_warnings;
        reseeded = true;
        continue;
      }
      m.weights[j] = mass / total_w;
      for (int t = 0; t < d; ++t) {
        double mu = 0.0;
        for (int i = 0; i < n; ++i) {
          mu += w[i] * m.responsibilities.at(i, j) * x.at(i, t);
        }
        mu /= mass;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
          const double diff = x.at(i, t) - mu;
          var += w[i] * m.responsibilities.at(i, j) * diff * diff;
        }
        m.means.at(j, t) = mu;
        m.variances.at(j, t) = std::max(var / mass, kGmmVarianceFloor);
      }
    }
    double wsum = 0.0;
    for (double v : m.weights) wsum += v;
    for (double& v : m.weights) v /= wsum;

    if (!reseeded && ll - prev_ll < tol && iter > 0) break;
    prev_ll = ll;
  }

  // Final E step so responsibilities match the returned parameters.
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lse = m.log_density(&x.v[static_cast<std::size_t>(i) * d], &joint);
    ll += w[i] * lse;
    for (int j = 0; j < k; ++j) {
      m.responsibilities.at(i, j) = std::exp(joint[j] - lse);
    }
  }
  m.loglik = ll;
  m.assignments.resize(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < k; ++j) {
      if (m.responsibilities.at(i, j) > m.responsibilities.at(i, best)) best = j;
    }
    m.assignments[i] = best;
  }
  return m;
}

// BIC = -2 loglik + p ln N with p = (K-1) + 2 K d free parameters.
inline double gmm_bic(const GmmModel& m, double n_points) {
  const double p = (m.k - 1) + 2.0 * m.k * m.dims;
  return -2.0 * m.loglik + p * std::log(n_points);
}

struct KSelectionEntry {
  int k = 0;
  double bic = 0.0;
  double silhouette = 0.0;  // NaN when undefined (K = 1)
};

struct KSelection {
  int chosen_k = 0;
  std::vector<KSelectionEntry> entries;
  std::vector<GmmModel> models;  // parallel to entries
};

// Fits every K in k_range and picks the elbow: the largest K whose BIC
// improvement over K-1 exceeds 2% of the total span below the smallest K.
// Ties on BIC (within 1e-9) are broken by the higher silhouette.
inline KSelection select_k_elbow(const Tensor& x, std::vector<int> k_range,
                                 std::uint64_t seed,
                                 const std::vector<double>* multiplicities = nullptr,
                                 int max_iter = 500) {
  require(!k_range.empty(), "select_k_elbow: empty k_range");
  std::sort(k_range.begin(), k_range.end());
  k_range.erase(std::unique(k_range.begin(), k_range.end()), k_range.end());
  require(k_range.front() >= 1, "select_k_elbow: K must be >= 1");
  require(k_range.back() < x.dim(0), "select_k_elbow: max K must be < N");

  double n_points = 0.0;
  if (multiplicities) {
    for (double v : *multiplicities) n_points += v;
  } else {
    n_points = x.dim(0);
  }

  KSelection sel;
  for (int k : k_range) {
    GmmModel m = gmm_fit(x, k, derive_seed(seed, "k" + std::to_string(k)),
                         multiplicities, max_iter);
    KSelectionEntry e;
    e.k = k;
    e.bic = gmm_bic(m, n_points);
    e.silhouette = std::numeric_limits<double>::quiet_NaN();
    if (k >= 2) {
      std::set<int> distinct(m.assignments.begin(), m.assignments.end());
      if (distinct.size() >= 2) {
        e.silhouette = silhouette_score(x, m.assignments, multiplicities);
      }
    }
    sel.entries.push_back(e);
    sel.models.push_back(std::move(m));
  }

  double min_bic = sel.entries[0].bic;
  for (const auto& e : sel.entries) min_bic = std::min(min_bic, e.bic);
  const double span = sel.entries[0].bic - min_bic;

  int chosen_idx = 0;
  if (span > 0.0) {
    for (std::size_t i = 1; i < sel.entries.size(); ++i) {
      const double improvement = sel.entries[i - 1].bic - sel.entries[i].bic;
      if (improvement > 0.02 * span) chosen_idx = static_cast<int>(i);
    }
  }
  // BIC tie-break by silhouette.
  for (std::size_t i = 0; i < sel.entries.size(); ++i) {
    if (static_cast<int>(i) == chosen_idx) continue;
    if (std::abs(sel.entries[i].bic - sel.entries[chosen_idx].bic) < 1e-9) {
      const double si = sel.entries[i].silhouette;
      const double sc = sel.entries[chosen_idx].silhouette;
      if (std::isfinite(si) && (!std::isfinite(sc) || si > sc)) {
        chosen_idx = static_cast<int>(i);
      }
    }
  }
  sel.chosen_k = sel.entries[chosen_idx].k;
  return sel;
}

}  // namespace cte
