// Dense row-major tensor of doubles plus the few linear-algebra kernels the
// models need. Matrix products are dispatched to Eigen with a fixed
// reduction order, so results are bitwise reproducible run to run.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "cte/common.hpp"
#include "cte/rng.hpp"

namespace cte {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(count(shape), 0.0);
  }
  Tensor(std::initializer_list<int> s) : Tensor(std::vector<int>(s)) {}

  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      require(d >= 0, "negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  static Tensor from(std::vector<int> s, std::vector<double> data) {
    Tensor t;
    t.shape = std::move(s);
    require(count(t.shape) == data.size(), "tensor data/shape mismatch");
    t.v = std::move(data);
    return t;
  }

  std::size_t size() const { return v.size(); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  // 2-D accessors.
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * dim(1) + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * dim(1) + c]; }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  void check_finite(const std::string& what) const {
    for (double x : v) {
      if (!std::isfinite(x)) throw NumericError("non-finite value in " + what);
    }
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const std::string& what) {
  if (!a.same_shape(b)) {
    throw DimensionError(what + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

using EigenMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;
using ConstEigenMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

// C (m x n) = alpha * op(A) * op(B) + beta * C, with raw row-major buffers.
inline void gemm(const double* a, int ar, int ac, bool ta, const double* b,
                 int br, int bc, bool tb, double* c, double beta = 0.0,
                 double alpha = 1.0) {
  ConstEigenMap A(a, ar, ac);
  ConstEigenMap B(b, br, bc);
  const int m = ta ? ac : ar;
  const int k = ta ? ar : ac;
  const int k2 = tb ? bc : br;
  const int n = tb ? br : bc;
  require(k == k2, "gemm: inner dimension mismatch");
  EigenMap C(c, m, n);
  if (beta == 0.0) {
    C.setZero();
  } else if (beta != 1.0) {
    C *= beta;
  }
  if (ta && tb) {
    C.noalias() += alpha * (A.transpose() * B.transpose());
  } else if (ta) {
    C.noalias() += alpha * (A.transpose() * B);
  } else if (tb) {
    C.noalias() += alpha * (A * B.transpose());
  } else {
    C.noalias() += alpha * (A * B);
  }
}

// out = op(A) * op(B) for 2-D tensors.
inline Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false,
                     bool tb = false) {
  require(a.ndim() == 2 && b.ndim() == 2, "matmul: 2-D tensors required");
  const int m = ta ? a.dim(1) : a.dim(0);
  const int n = tb ? b.dim(0) : b.dim(1);
  Tensor out({m, n});
  gemm(a.v.data(), a.dim(0), a.dim(1), ta, b.v.data(), b.dim(0), b.dim(1), tb,
       out.v.data());
  return out;
}

inline double squared_distance(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

inline double euclidean(const double* a, const double* b, int d) {
  return std::sqrt(squared_distance(a, b, d));
}

}  // namespace cte
