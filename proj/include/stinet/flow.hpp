#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>
#include <vector>

#include "stinet/image.hpp"
#include "stinet/module.hpp"

namespace stinet {

// Per-pixel displacement map between two frames. Channel 0 is the x
// displacement, channel 1 the y displacement, in pixels of its own grid.
template <typename S>
struct FlowField {
  Tensor<S> values;  // {2,H,W}
  double src_time = 0;
  double dst_time = 0;
};

template <typename S>
class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  virtual Tensor<S> forward(const Tensor<S>& a, const Tensor<S>& b) const = 0;
  virtual bool differentiable() const = 0;
};

// Small encoder-decoder flow network (three downsampling stages with skip
// connections). The prediction head is zero-initialized, so an untrained
// estimator reports zero motion.
template <typename S>
class TinyFlowNet : public FlowEstimator<S> {
 public:
  TinyFlowNet() = default;
  TinyFlowNet(int64_t base_channels, Rng rng) : cf_(base_channels) {
    const int64_t c1 = cf_, c2 = cf_ + cf_ / 2, c3 = 2 * cf_, c4 = 3 * cf_;
    e0_ = Conv<S>::make(c1, 6, 3, rng);
    e1a_ = Conv<S>::make(c2, c1, 3, rng, false, 2);
    e1b_ = Conv<S>::make(c2, c2, 3, rng);
    e2a_ = Conv<S>::make(c3, c2, 3, rng, false, 2);
    e2b_ = Conv<S>::make(c3, c3, 3, rng);
    e3a_ = Conv<S>::make(c4, c3, 3, rng, false, 2);
    e3b_ = Conv<S>::make(c4, c4, 3, rng);
    d2_ = Conv<S>::make(c3, c4 + c3, 3, rng);
    d1_ = Conv<S>::make(c2, c3 + c2, 3, rng);
    d0_ = Conv<S>::make(c1, c2 + c1, 3, rng);
    head_ = Conv<S>::make(2, c1, 3, rng, /*zero_init=*/true);
  }

  Tensor<S> forward(const Tensor<S>& a, const Tensor<S>& b) const override {
    STINET_CHECK(a.shape() == b.shape(), "estimate_flow: frame shapes differ");
    STINET_CHECK(a.ndim() == 3, "estimate_flow: expected CHW frames");
    auto e0 = leaky_relu(e0_(concat_ch<S>({a, b})));
    auto e1 = leaky_relu(e1b_(leaky_relu(e1a_(e0))));
    auto e2 = leaky_relu(e2b_(leaky_relu(e2a_(e1))));
    auto e3 = leaky_relu(e3b_(leaky_relu(e3a_(e2))));
    auto d2 = leaky_relu(d2_(concat_ch<S>({resize_bilinear(e3, e2.dim(1), e2.dim(2)), e2})));
    auto d1 = leaky_relu(d1_(concat_ch<S>({resize_bilinear(d2, e1.dim(1), e1.dim(2)), e1})));
    auto d0 = leaky_relu(d0_(concat_ch<S>({resize_bilinear(d1, e0.dim(1), e0.dim(2)), e0})));
    return head_(d0);
  }

  bool differentiable() const override { return true; }

  void set_trainable(bool on) {
    ParamList<S> ps;
    visit("flow", ps);
    for (auto* t : ps.tensors) t->set_requires_grad(on);
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    e0_.visit(p + ".e0", f);
    e1a_.visit(p + ".e1a", f);
    e1b_.visit(p + ".e1b", f);
    e2a_.visit(p + ".e2a", f);
    e2b_.visit(p + ".e2b", f);
    e3a_.visit(p + ".e3a", f);
    e3b_.visit(p + ".e3b", f);
    d2_.visit(p + ".d2", f);
    d1_.visit(p + ".d1", f);
    d0_.visit(p + ".d0", f);
    head_.visit(p + ".head", f);
  }

  int64_t base_channels() const { return cf_; }

 private:
  int64_t cf_ = 16;
  Conv<S> e0_, e1a_, e1b_, e2a_, e2b_, e3a_, e3b_, d2_, d1_, d0_, head_;
};

template <typename S>
FlowField<S> estimate_flow(const FlowEstimator<S>& estimator, const Tensor<S>& frame_a,
                           const Tensor<S>& frame_b, double t_a = 0, double t_b = 1) {
  return FlowField<S>{estimator.forward(frame_a, frame_b), t_a, t_b};
}

// Linear-motion flow adaptation: given the bidirectional flows between two
// frames at src/dst times (t-1 and t+1, two time units apart), produce the
// flows anchored at an intermediate stamp t':
//   O_{t'->t-1} = (t' - (t-1)) / 2 * O_{t+1->t-1}
//   O_{t'->t+1} = ((t+1) - t') / 2 * O_{t-1->t+1}
// The divisor is the interval length, which is 2 by construction.
template <typename S>
std::pair<FlowField<S>, FlowField<S>> adapt_flow(const FlowField<S>& o_fwd,
                                                 const FlowField<S>& o_bwd, double t_prime) {
  const double t_prev = o_fwd.src_time;
  const double t_next = o_fwd.dst_time;
  STINET_CHECK(o_bwd.src_time == t_next && o_bwd.dst_time == t_prev,
               "adapt_flow: o_bwd must be the reverse of o_fwd");
  STINET_CHECK(t_prev < t_prime && t_prime < t_next,
               "adapt_flow: t' must lie strictly inside (t-1, t+1)");
  STINET_CHECK(o_fwd.values.shape() == o_bwd.values.shape(), "adapt_flow: flow shapes differ");
  const double span = t_next - t_prev;
  const S f_prev = S((t_prime - t_prev) / span);
  const S f_next = S((t_next - t_prime) / span);
  FlowField<S> to_prev{scale(o_bwd.values, f_prev), t_prime, t_prev};
  FlowField<S> to_next{scale(o_fwd.values, f_next), t_prime, t_next};
  return {std::move(to_prev), std::move(to_next)};
}

// Uniform intermediate stamps for n-frame interpolation between given
// frames at t_prev and t_prev + 2: t'_k = t_prev + 2k/(n+1), k = 1..n.
inline std::vector<double> intermediate_times(double t_prev, int64_t n) {
  std::vector<double> ts;
  for (int64_t k = 1; k <= n; ++k) ts.push_back(t_prev + 2.0 * double(k) / double(n + 1));
  return ts;
}

// Differentiable backward warping of an image or feature map by a flow.
template <typename S>
Tensor<S> warp_backward(const Tensor<S>& map, const FlowField<S>& flow) {
  return warp_bilinear(map, flow.values);
}

// ---- debug dump format: int32 H, W then row-major float32 (dx, dy) pairs ----

template <typename S>
void write_flow(const std::string& path, const Tensor<S>& flow) {
  STINET_CHECK(flow.ndim() == 3 && flow.dim(0) == 2, "write_flow: expected {2,H,W}");
  std::ofstream out(path, std::ios::binary);
  STINET_CHECK(out.good(), "write_flow: cannot open ", path);
  const int32_t h = int32_t(flow.dim(1)), w = int32_t(flow.dim(2));
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  const S* p = flow.data();
  for (int64_t i = 0; i < int64_t(h) * w; ++i) {
    const float pair[2] = {float(p[i]), float(p[int64_t(h) * w + i])};
    out.write(reinterpret_cast<const char*>(pair), 8);
  }
}

template <typename S>
Tensor<S> read_flow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  STINET_CHECK(in.good(), "read_flow: cannot open ", path);
  int32_t h = 0, w = 0;
  in.read(reinterpret_cast<char*>(&h), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  STINET_CHECK(in.good() && h > 0 && w > 0, "read_flow: bad header in ", path);
  auto flow = Tensor<S>::zeros({2, h, w});
  S* p = flow.data();
  for (int64_t i = 0; i < int64_t(h) * w; ++i) {
    float pair[2];
    in.read(reinterpret_cast<char*>(pair), 8);
    STINET_CHECK(in.good(), "read_flow: truncated file ", path);
    p[i] = S(pair[0]);
    p[int64_t(h) * w + i] = S(pair[1]);
  }
  return flow;
}

// Middlebury-style color-wheel rendering (hue = direction, saturation =
// relative magnitude) for quick visual inspection.
template <typename S>
Image flow_to_color(const Tensor<S>& flow) {
  STINET_CHECK(flow.ndim() == 3 && flow.dim(0) == 2, "flow_to_color: expected {2,H,W}");
  const int64_t h = flow.dim(1), w = flow.dim(2), n = h * w;
  const S* p = flow.data();
  double maxmag = 1e-9;
  for (int64_t i = 0; i < n; ++i)
    maxmag = std::max(maxmag, std::hypot(double(p[i]), double(p[n + i])));
  Image img(3, h, w);
  for (int64_t i = 0; i < n; ++i) {
    const double u = double(p[i]), v = double(p[n + i]);
    const double mag = std::hypot(u, v) / maxmag;
    const double ang = (std::atan2(-v, -u) / 3.14159265358979 + 1.0) / 2.0;  // [0,1)
    // HSV -> RGB with V = 1
    const double hh = ang * 6.0;
    const int sect = int(hh) % 6;
    const double f = hh - std::floor(hh);
    const double q = 1.0 - mag * f, t = 1.0 - mag * (1.0 - f), pp = 1.0 - mag;
    double r, g, b;
    switch (sect) {
      case 0: r = 1, g = t, b = pp; break;
      case 1: r = q, g = 1, b = pp; break;
      case 2: r = pp, g = 1, b = t; break;
      case 3: r = pp, g = q, b = 1; break;
      case 4: r = t, g = pp, b = 1; break;
      default: r = 1, g = pp, b = q; break;
    }
    img.data[i] = float(r);
    img.data[n + i] = float(g);
    img.data[2 * n + i] = float(b);
  }
  return img;
}

}  // namespace stinet
