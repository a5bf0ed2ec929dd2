#pragma once

#include <cmath>
#include <vector>

#include "stinet/image.hpp"

namespace stinet {

struct MetricOptions {
  bool rgb = false;        // default: luma (Y) channel of BT.601 YCbCr
  double psnr_cap = 100;   // dB returned for identical images
};

namespace detail {

inline std::vector<Image> metric_planes(const Image& img, bool rgb) {
  if (!rgb || img.c == 1) return {luma601(img)};
  std::vector<Image> planes;
  for (int64_t ch = 0; ch < img.c; ++ch) {
    Image p(1, img.h, img.w);
    std::copy(img.data.begin() + ch * img.h * img.w,
              img.data.begin() + (ch + 1) * img.h * img.w, p.data.begin());
    planes.push_back(std::move(p));
  }
  return planes;
}

inline std::vector<double> gaussian_window11() {
  std::vector<double> w(11);
  const double sigma = 1.5;
  double sum = 0;
  for (int i = 0; i < 11; ++i) {
    const double d = double(i - 5);
    w[size_t(i)] = std::exp(-d * d / (2 * sigma * sigma));
    sum += w[size_t(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable 11-tap filtering with 'valid' output.
inline std::vector<double> filter_valid(const std::vector<double>& in, int64_t h, int64_t w,
                                        const std::vector<double>& k) {
  const int64_t r = int64_t(k.size());
  const int64_t ow = w - r + 1;
  std::vector<double> tmp(size_t(h * ow));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int64_t i = 0; i < r; ++i) acc += k[size_t(i)] * in[size_t(y * w + x + i)];
      tmp[size_t(y * ow + x)] = acc;
    }
  const int64_t oh = h - r + 1;
  std::vector<double> out(size_t(oh * ow));
  for (int64_t y = 0; y < oh; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int64_t i = 0; i < r; ++i) acc += k[size_t(i)] * tmp[size_t((y + i) * ow + x)];
      out[size_t(y * ow + x)] = acc;
    }
  return out;
}

}  // namespace detail

// PSNR in dB: 10*log10(1/MSE) on [0,1] images, luma channel by default;
// identical images return the configured cap.
inline double psnr(const Image& pred, const Image& gt, const MetricOptions& opt = {}) {
  STINET_CHECK(pred.c == gt.c && pred.h == gt.h && pred.w == gt.w, "psnr: shape mismatch");
  auto pp = detail::metric_planes(pred, opt.rgb);
  auto gp = detail::metric_planes(gt, opt.rgb);
  double mse = 0;
  int64_t count = 0;
  for (size_t k = 0; k < pp.size(); ++k) {
    for (size_t i = 0; i < pp[k].data.size(); ++i) {
      const double d = double(pp[k].data[i]) - double(gp[k].data[i]);
      mse += d * d;
    }
    count += int64_t(pp[k].data.size());
  }
  mse /= double(count);
  if (mse <= 0) return opt.psnr_cap;
  return std::min(opt.psnr_cap, 10.0 * std::log10(1.0 / mse));
}

// Mean local SSIM with the standard 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1; computed over the valid region of
// the luma channel (mean over channels with --rgb).
inline double ssim(const Image& pred, const Image& gt, const MetricOptions& opt = {}) {
  STINET_CHECK(pred.c == gt.c && pred.h == gt.h && pred.w == gt.w, "ssim: shape mismatch");
  STINET_CHECK(pred.h >= 11 && pred.w >= 11, "ssim: image smaller than the 11x11 window");
  const auto kern = detail::gaussian_window11();
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  auto pp = detail::metric_planes(pred, opt.rgb);
  auto gp = detail::metric_planes(gt, opt.rgb);
  double total = 0;
  for (size_t k = 0; k < pp.size(); ++k) {
    const int64_t h = pp[k].h, w = pp[k].w;
    std::vector<double> a(pp[k].data.begin(), pp[k].data.end());
    std::vector<double> b(gp[k].data.begin(), gp[k].data.end());
    std::vector<double> aa(a.size()), bb(b.size()), ab(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
      aa[i] = a[i] * a[i];
      bb[i] = b[i] * b[i];
      ab[i] = a[i] * b[i];
    }
    auto mu1 = detail::filter_valid(a, h, w, kern);
    auto mu2 = detail::filter_valid(b, h, w, kern);
    auto s11 = detail::filter_valid(aa, h, w, kern);
    auto s22 = detail::filter_valid(bb, h, w, kern);
    auto s12 = detail::filter_valid(ab, h, w, kern);
    double acc = 0;
    for (size_t i = 0; i < mu1.size(); ++i) {
      const double m1 = mu1[i], m2 = mu2[i];
      const double v1 = s11[i] - m1 * m1;
      const double v2 = s22[i] - m2 * m2;
      const double cov = s12[i] - m1 * m2;
      acc += ((2 * m1 * m2 + c1) * (2 * cov + c2)) /
             ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
    }
    total += acc / double(mu1.size());
  }
  return total / double(pp.size());
}

}  // namespace stinet
