#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "stinet/png_io.hpp"

namespace stinet {

// Minimal PNG chart renderer for loss curves and ablation bars; no external
// plotting dependency. 3x5 bitmap glyphs cover digits and a few symbols.
namespace plot {

inline const char* glyph(char c) {
  switch (c) {
    case '0': return "111101101101111";
    case '1': return "010110010010111";
    case '2': return "111001111100111";
    case '3': return "111001111001111";
    case '4': return "101101111001001";
    case '5': return "111100111001111";
    case '6': return "111100111101111";
    case '7': return "111001010010010";
    case '8': return "111101111101111";
    case '9': return "111101111001111";
    case '.': return "000000000000010";
    case '-': return "000000111000000";
    case 'e': return "011101110100011";
    case '+': return "000010111010000";
    default: return "000000000000000";
  }
}

struct Canvas {
  Image img;
  explicit Canvas(int64_t h = 480, int64_t w = 720) : img(3, h, w, 1.f) {}

  void put(int64_t y, int64_t x, float r, float g, float b) {
    if (y < 0 || y >= img.h || x < 0 || x >= img.w) return;
    img.at(0, y, x) = r;
    img.at(1, y, x) = g;
    img.at(2, y, x) = b;
  }

  void line(double y0, double x0, double y1, double x1, float r, float g, float b) {
    const double len = std::max(std::abs(y1 - y0), std::abs(x1 - x0));
    const int steps = std::max(1, int(std::ceil(len)));
    for (int i = 0; i <= steps; ++i) {
      const double t = double(i) / steps;
      put(int64_t(std::lround(y0 + (y1 - y0) * t)), int64_t(std::lround(x0 + (x1 - x0) * t)), r,
          g, b);
    }
  }

  void rect(int64_t y0, int64_t x0, int64_t y1, int64_t x1, float r, float g, float b) {
    for (int64_t y = y0; y <= y1; ++y)
      for (int64_t x = x0; x <= x1; ++x) put(y, x, r, g, b);
  }

  void text(int64_t y, int64_t x, const std::string& s, float r = 0, float g = 0, float b = 0) {
    for (char c : s) {
      const char* bits = glyph(c);
      for (int i = 0; i < 15; ++i)
        if (bits[i] == '1') put(y + i / 3, x + i % 3, r, g, b);
      x += 4;
    }
  }
};

inline std::string fmt_num(double v) {
  char buf[32];
  if (v != 0 && (std::abs(v) < 1e-3 || std::abs(v) >= 1e4)) std::snprintf(buf, sizeof(buf), "%.1e", v);
  else std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct Series {
  std::string name;
  std::vector<double> values;
  float r = 0.8f, g = 0.2f, b = 0.2f;
};

inline void line_chart(const std::vector<Series>& series, const std::string& path) {
  Canvas cv;
  const int64_t mL = 52, mR = 12, mT = 12, mB = 24;
  double lo = 1e300, hi = -1e300;
  size_t n = 1;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (lo > hi) {
    lo = 0;
    hi = 1;
  }
  if (hi - lo < 1e-12) hi = lo + 1;
  const double py0 = double(cv.img.h - mB), py1 = double(mT);
  const double px0 = double(mL), px1 = double(cv.img.w - mR);
  cv.line(py0, px0, py1, px0, 0, 0, 0);
  cv.line(py0, px0, py0, px1, 0, 0, 0);
  for (int gy = 0; gy <= 4; ++gy) {
    const double v = lo + (hi - lo) * gy / 4.0;
    const double y = py0 + (py1 - py0) * gy / 4.0;
    cv.line(y, px0 - 3, y, px0, 0, 0, 0);
    cv.text(int64_t(y) - 2, 4, fmt_num(v));
  }
  cv.text(int64_t(py0) + 8, int64_t(px1) - 30, fmt_num(double(n - 1)));
  cv.text(int64_t(py0) + 8, int64_t(px0), "0");
  int64_t ly = mT + 4;
  for (const auto& s : series) {
    for (size_t i = 1; i < s.values.size(); ++i) {
      const double xA = px0 + (px1 - px0) * double(i - 1) / double(std::max<size_t>(n - 1, 1));
      const double xB = px0 + (px1 - px0) * double(i) / double(std::max<size_t>(n - 1, 1));
      const double yA = py0 + (py1 - py0) * (s.values[i - 1] - lo) / (hi - lo);
      const double yB = py0 + (py1 - py0) * (s.values[i] - lo) / (hi - lo);
      cv.line(yA, xA, yB, xB, s.r, s.g, s.b);
    }
    cv.rect(ly, cv.img.w - 90, ly + 4, cv.img.w - 84, s.r, s.g, s.b);
    cv.text(ly, cv.img.w - 80, s.name.substr(0, 12));
    ly += 10;
  }
  write_png(path, cv.img);
}

inline void bar_chart(const std::vector<std::pair<std::string, double>>& bars,
                      const std::string& path) {
  Canvas cv;
  const int64_t mL = 52, mR = 12, mT = 12, mB = 40;
  double lo = 0, hi = 1e-9;
  for (const auto& [_, v] : bars) hi = std::max(hi, v);
  hi *= 1.05;
  const double py0 = double(cv.img.h - mB), py1 = double(mT);
  const double px0 = double(mL), px1 = double(cv.img.w - mR);
  cv.line(py0, px0, py1, px0, 0, 0, 0);
  cv.line(py0, px0, py0, px1, 0, 0, 0);
  for (int gy = 0; gy <= 4; ++gy) {
    const double v = lo + (hi - lo) * gy / 4.0;
    const double y = py0 + (py1 - py0) * gy / 4.0;
    cv.text(int64_t(y) - 2, 4, fmt_num(v));
  }
  const double bw = (px1 - px0) / double(bars.size());
  for (size_t i = 0; i < bars.size(); ++i) {
    const double x0 = px0 + bw * double(i) + bw * 0.15;
    const double x1 = px0 + bw * double(i + 1) - bw * 0.15;
    const double y = py0 + (py1 - py0) * (bars[i].second - lo) / (hi - lo);
    cv.rect(int64_t(y), int64_t(x0), int64_t(py0) - 1, int64_t(x1), 0.25f, 0.45f, 0.75f);
    cv.text(int64_t(py0) + 8 + int64_t(i % 2) * 8, int64_t(x0), bars[i].first.substr(0, 14));
  }
  write_png(path, cv.img);
}

}  // namespace plot
}  // namespace stinet
