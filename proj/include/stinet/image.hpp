#pragma once

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdint>
#include <vector>

#include "stinet/common.hpp"

namespace stinet {

// Planar CHW float image, values nominally in [0,1].
struct Image {
  int64_t c = 0, h = 0, w = 0;
  std::vector<float> data;

  Image() = default;
  Image(int64_t c_, int64_t h_, int64_t w_, float fill = 0.f)
      : c(c_), h(h_), w(w_), data(size_t(c_ * h_ * w_), fill) {}

  float& at(int64_t ch, int64_t y, int64_t x) { return data[(ch * h + y) * w + x]; }
  float at(int64_t ch, int64_t y, int64_t x) const { return data[(ch * h + y) * w + x]; }
  int64_t numel() const { return c * h * w; }

  void clamp01() {
    for (auto& v : data) v = std::min(1.f, std::max(0.f, v));
  }
};

namespace detail {

// Keys-style cubic kernel with a = -0.5.
inline double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t < 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
  if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
  return 0.0;
}

// Mirror at the boundary between samples (half-sample symmetric):
// -1 -> 0, -2 -> 1, n -> n-1, ...
inline int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

struct CubicTaps {
  int64_t idx[4];
  double w[4];
};

// Point-sampled bicubic taps with half-pixel centers. No antialias
// prefilter: for the exact 4x degradation used here the taps never leave
// the frame, which keeps the ramp-reproduction property exact.
inline std::vector<CubicTaps> cubic_taps(int64_t out_n, int64_t in_n) {
  std::vector<CubicTaps> taps(out_n);
  const double s = double(in_n) / double(out_n);
  for (int64_t o = 0; o < out_n; ++o) {
    const double src = (double(o) + 0.5) * s - 0.5;
    const int64_t base = int64_t(std::floor(src)) - 1;
    double wsum = 0;
    for (int k = 0; k < 4; ++k) {
      taps[o].idx[k] = reflect_index(base + k, in_n);
      taps[o].w[k] = cubic_weight(src - double(base + k));
      wsum += taps[o].w[k];
    }
    for (int k = 0; k < 4; ++k) taps[o].w[k] /= wsum;
  }
  return taps;
}

}  // namespace detail

// Separable bicubic resize (a = -0.5, reflected edges). Used both for the
// 4x degradation that produces LR training data and for the bicubic
// upsampling baseline.
inline Image bicubic_resize(const Image& in, int64_t oh, int64_t ow) {
  STINET_CHECK(in.h >= 1 && in.w >= 1, "bicubic_resize: empty image");
  if (oh == in.h && ow == in.w) return in;
  const auto tx = detail::cubic_taps(ow, in.w);
  const auto ty = detail::cubic_taps(oh, in.h);
  Image tmp(in.c, in.h, ow);
  for (int64_t ch = 0; ch < in.c; ++ch)
    for (int64_t y = 0; y < in.h; ++y)
      for (int64_t x = 0; x < ow; ++x) {
        const auto& t = tx[x];
        double acc = 0;
        for (int k = 0; k < 4; ++k) acc += t.w[k] * in.at(ch, y, t.idx[k]);
        tmp.at(ch, y, x) = float(acc);
      }
  Image out(in.c, oh, ow);
  for (int64_t ch = 0; ch < in.c; ++ch)
    for (int64_t y = 0; y < oh; ++y) {
      const auto& t = ty[y];
      for (int64_t x = 0; x < ow; ++x) {
        double acc = 0;
        for (int k = 0; k < 4; ++k) acc += t.w[k] * tmp.at(ch, t.idx[k], x);
        out.at(ch, y, x) = float(acc);
      }
    }
  return out;
}

// BT.601 luma of an RGB image in [0,1], itself kept in [0,1] (the 16..235
// digital range divided by 255, the convention VSR evaluation scripts use).
// Single-channel images pass through unchanged.
inline Image luma601(const Image& in) {
  if (in.c == 1) return in;
  STINET_CHECK(in.c == 3, "luma601: expected 1 or 3 channels");
  Image out(1, in.h, in.w);
  const int64_t n = in.h * in.w;
  for (int64_t i = 0; i < n; ++i) {
    const double r = in.data[i], g = in.data[n + i], b = in.data[2 * n + i];
    out.data[i] = float((16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0);
  }
  return out;
}

// Round-half-even quantization to 8 bit.
inline uint8_t quantize8(float v) {
  const double x = std::min(1.0, std::max(0.0, double(v))) * 255.0;
  return uint8_t(std::nearbyint(x));
}

inline float dequantize8(uint8_t v) { return float(v) / 255.f; }

}  // namespace stinet
