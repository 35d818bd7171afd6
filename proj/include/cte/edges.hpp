// Grayscale conversion and Canny edge detection over 16x16 tile patches.
//
// Fixed parameter set: Gaussian sigma = 1.0 on a 5x5 kernel, Sobel 3x3,
// hysteresis thresholds (0.1, 0.2) on gradient magnitude normalized to its
// per-patch maximum. Blur and Sobel use reflect padding so small patches do
// not grow spurious border edges. Non-maximum suppression quantizes the
// gradient direction into four sectors and keeps a pixel iff its magnitude is
// strictly greater than the neighbour on one side of the sector axis and at
// least equal on the other (single-pixel ridges on symmetric edges).
//
// Normalized magnitudes are rounded to a 1e-12 grid before any comparison.
// Symmetric patterns produce exact magnitude ties whose >=/> outcomes would
// otherwise depend on convolution summation order; the rounding makes the
// detector reproducible across algebraically equivalent implementations.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cte/common.hpp"

namespace cte {

struct CannyParams {
  double sigma = 1.0;
  int kernel = 5;
  double low = 0.1;
  double high = 0.2;
};

// 16x16 binary edge map; values are exactly 0.0 or 1.0.
using EdgeMap = std::vector<double>;

// Luminance = 0.299 R + 0.587 G + 0.114 B. Input [y][x][c] in [0, 1].
inline std::vector<double> to_grayscale(const std::vector<double>& patch,
                                        int side = 16) {
  if (patch.size() != static_cast<std::size_t>(side) * side * 3) {
    throw DimensionError("to_grayscale: expected " + std::to_string(side) +
                         "x" + std::to_string(side) + "x3 patch");
  }
  std::vector<double> gray(static_cast<std::size_t>(side) * side);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    gray[i] = 0.299 * patch[3 * i] + 0.587 * patch[3 * i + 1] +
              0.114 * patch[3 * i + 2];
  }
  return gray;
}

namespace detail {

inline int reflect_index(int i, int n) {
  // Reflect-101-free simple mirror: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

inline std::vector<double> gaussian_kernel_1d(double sigma, int size) {
  std::vector<double> k(size);
  const int half = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - half;
    k[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace detail

// Canny over a square grayscale patch in [0, 1]; returns a binary map.
inline EdgeMap canny_edges(const std::vector<double>& gray, int side = 16,
                           const CannyParams& params = CannyParams{}) {
  const std::size_t n = static_cast<std::size_t>(side) * side;
  if (gray.size() != n) {
    throw DimensionError("canny_edges: expected " + std::to_string(side) +
                         "x" + std::to_string(side) + " grayscale patch");
  }
  auto idx = [side](int y, int x) {
    return static_cast<std::size_t>(y) * side + x;
  };

  // Separable Gaussian blur with reflect padding.
  const auto k = detail::gaussian_kernel_1d(params.sigma, params.kernel);
  const int half = params.kernel / 2;
  std::vector<double> tmp(n), blur(n);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      double acc = 0.0;
      for (int t = -half; t <= half; ++t) {
        acc += k[t + half] * gray[idx(y, detail::reflect_index(x + t, side))];
      }
      tmp[idx(y, x)] = acc;
    }
  }
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      double acc = 0.0;
      for (int t = -half; t <= half; ++t) {
        acc += k[t + half] * tmp[idx(detail::reflect_index(y + t, side), x)];
      }
      blur[idx(y, x)] = acc;
    }
  }

  // Sobel gradients, reflect padding.
  std::vector<double> gx(n), gy(n), mag(n);
  double max_mag = 0.0;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      auto b = [&](int dy, int dx) {
        return blur[idx(detail::reflect_index(y + dy, side),
                        detail::reflect_index(x + dx, side))];
      };
      const double sx = (b(-1, 1) + 2.0 * b(0, 1) + b(1, 1)) -
                        (b(-1, -1) + 2.0 * b(0, -1) + b(1, -1));
      const double sy = (b(1, -1) + 2.0 * b(1, 0) + b(1, 1)) -
                        (b(-1, -1) + 2.0 * b(-1, 0) + b(-1, 1));
      gx[idx(y, x)] = sx;
      gy[idx(y, x)] = sy;
      mag[idx(y, x)] = std::sqrt(sx * sx + sy * sy);
      max_mag = std::max(max_mag, mag[idx(y, x)]);
    }
  }

  EdgeMap out(n, 0.0);
  if (max_mag <= 0.0) return out;  // constant patch

  for (double& v : mag) v = std::round(v / max_mag * 1e12) / 1e12;

  // Non-maximum suppression. Sector axes: 0 = horizontal gradient (E/W
  // neighbours), 1 = diagonal NE/SW, 2 = vertical (N/S), 3 = diagonal NW/SE.
  std::vector<std::uint8_t> nms(n, 0);
  static const int kNeigh[4][2][2] = {
      {{0, -1}, {0, 1}}, {{-1, 1}, {1, -1}}, {{-1, 0}, {1, 0}}, {{-1, -1}, {1, 1}}};
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double m = mag[idx(y, x)];
      if (m <= 0.0) continue;
      const double ang = std::atan2(gy[idx(y, x)], gx[idx(y, x)]);
      // Map angle to a sector in [0, 4).
      double a = ang * (180.0 / 3.14159265358979323846);
      if (a < 0) a += 180.0;
      int sector;
      if (a < 22.5 || a >= 157.5) {
        sector = 0;
      } else if (a < 67.5) {
        sector = 1;
      } else if (a < 112.5) {
        sector = 2;
      } else {
        sector = 3;
      }
      auto neighbour = [&](int which) {
        const int ny = y + kNeigh[sector][which][0];
        const int nx = x + kNeigh[sector][which][1];
        if (ny < 0 || ny >= side || nx < 0 || nx >= side) return 0.0;
        return mag[idx(ny, nx)];
      };
      if (m > neighbour(0) && m >= neighbour(1)) nms[idx(y, x)] = 1;
    }
  }

  // Double threshold + hysteresis (8-connected BFS from strong pixels).
  std::vector<std::uint8_t> strength(n, 0);  // 0 none, 1 weak, 2 strong
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    if (!nms[i]) continue;
    if (mag[i] >= params.high) {
      strength[i] = 2;
      stack.push_back(i);
    } else if (mag[i] >= params.low) {
      strength[i] = 1;
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    out[i] = 1.0;
    const int y = static_cast<int>(i) / side;
    const int x = static_cast<int>(i) % side;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dy && !dx) continue;
        const int ny = y + dy;
        const int nx = x + dx;
        if (ny < 0 || ny >= side || nx < 0 || nx >= side) continue;
        const std::size_t j = idx(ny, nx);
        if (strength[j] == 1 && out[j] == 0.0) {
          strength[j] = 2;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

// Convenience: edges of one tile directly from its RGB patch.
inline EdgeMap tile_edges(const std::vector<double>& rgb_patch,
                          const CannyParams& params = CannyParams{}) {
  return canny_edges(to_grayscale(rgb_patch, 16), 16, params);
}

}  // namespace cte
