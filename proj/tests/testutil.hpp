#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "stinet/image.hpp"
#include "stinet/rng.hpp"
#include "stinet/tensor.hpp"

namespace testutil {

template <typename S>
stinet::Tensor<S> random_tensor(std::vector<int64_t> shape, stinet::Rng& rng, double lo = -1.0,
                                double hi = 1.0, bool requires_grad = false) {
  auto t = stinet::Tensor<S>::zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = S(rng.uniform(lo, hi));
  return t;
}

inline stinet::Image random_image(int64_t c, int64_t h, int64_t w, stinet::Rng& rng) {
  stinet::Image img(c, h, w);
  for (auto& v : img.data) v = float(rng.uniform());
  return img;
}

// Central finite-difference check of reverse-mode gradients. `forward` must
// rebuild the graph from the given leaves on every call; a random subset of
// coordinates is probed per leaf (all of them for small leaves).
inline void expect_gradients_match(const std::function<stinet::Tensor<double>()>& forward,
                                   std::vector<stinet::Tensor<double>> leaves,
                                   double tol = 1e-4, int max_coords = 24, double eps = 1e-5,
                                   uint64_t seed = 7) {
  for (auto& leaf : leaves) {
    ASSERT_TRUE(leaf.requires_grad());
    leaf.zero_grad();
  }
  auto loss = forward();
  ASSERT_EQ(loss.numel(), 1);
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves) {
    analytic.push_back(leaf.has_grad() ? leaf.grad_view()
                                       : std::vector<double>(size_t(leaf.numel()), 0.0));
  }
  stinet::Rng rng(seed);
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    const int64_t n = leaf.numel();
    std::vector<int64_t> coords;
    if (n <= max_coords) {
      for (int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords; ++i) coords.push_back(int64_t(rng.uniform_int(uint64_t(n))));
    }
    for (int64_t ci : coords) {
      const double x0 = leaf.data()[ci];
      const double h = eps * std::max(1.0, std::abs(x0));
      leaf.data()[ci] = x0 + h;
      const double fp = forward().item();
      leaf.data()[ci] = x0 - h;
      const double fm = forward().item();
      leaf.data()[ci] = x0;
      const double fd = (fp - fm) / (2 * h);
      const double an = analytic[li][size_t(ci)];
      const double denom = std::max({std::abs(an), std::abs(fd), 1e-4});
      EXPECT_LT(std::abs(an - fd) / denom, tol)
          << "leaf " << li << " coord " << ci << ": analytic " << an << " vs fd " << fd;
    }
  }
}

// Independent PSNR/SSIM oracles: direct double-precision window loops,
// deliberately a different code path from the library implementation.
inline double ref_psnr_1ch(const stinet::Image& a, const stinet::Image& b, double cap = 100) {
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    mse += d * d;
  }
  mse /= double(a.data.size());
  if (mse <= 0) return cap;
  return std::min(cap, 10.0 * std::log10(1.0 / mse));
}

inline double ref_ssim_1ch(const stinet::Image& img1, const stinet::Image& img2) {
  const int64_t h = img1.h, w = img1.w;
  double kern[11][11];
  double ksum = 0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const double dy = y - 5, dx = x - 5;
      kern[y][x] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      ksum += kern[y][x];
    }
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) kern[y][x] /= ksum;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0;
  int64_t count = 0;
  for (int64_t y0 = 0; y0 + 11 <= h; ++y0)
    for (int64_t x0 = 0; x0 + 11 <= w; ++x0) {
      double m1 = 0, m2 = 0, s1 = 0, s2 = 0, s12 = 0;
      for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) {
          const double a = img1.at(0, y0 + y, x0 + x);
          const double b = img2.at(0, y0 + y, x0 + x);
          m1 += kern[y][x] * a;
          m2 += kern[y][x] * b;
          s1 += kern[y][x] * a * a;
          s2 += kern[y][x] * b * b;
          s12 += kern[y][x] * a * b;
        }
      const double v1 = s1 - m1 * m1, v2 = s2 - m2 * m2, cov = s12 - m1 * m2;
      acc += ((2 * m1 * m2 + c1) * (2 * cov + c2)) /
             ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
      ++count;
    }
  return acc / double(count);
}

}  // namespace testutil
