#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "stinet/tensor.hpp"

// Spatial operators on CHW tensors. Convolutions run as im2col + GEMM;
// everything exposes analytic gradients that the test suite checks against
// central finite differences.

namespace stinet {

namespace detail {

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct ConvGeom {
  int64_t ic, h, w;      // input
  int64_t kh, kw;        // kernel
  int64_t stride, pad;   // symmetric zero pad
  int64_t oh, ow;        // output

  static ConvGeom forward(int64_t ic, int64_t h, int64_t w, int64_t kh, int64_t kw,
                          int64_t stride, int64_t pad) {
    ConvGeom g{ic, h, w, kh, kw, stride, pad, 0, 0};
    g.oh = (h + 2 * pad - kh) / stride + 1;
    g.ow = (w + 2 * pad - kw) / stride + 1;
    STINET_CHECK(g.oh > 0 && g.ow > 0, "conv output size must be positive");
    return g;
  }
  int64_t col_rows() const { return ic * kh * kw; }
  int64_t col_cols() const { return oh * ow; }
};

template <typename S>
void im2col(const S* x, const ConvGeom& g, S* col) {
  const int64_t n = g.col_cols();
  for (int64_t ic = 0; ic < g.ic; ++ic) {
    const S* plane = x + ic * g.h * g.w;
    for (int64_t ky = 0; ky < g.kh; ++ky) {
      for (int64_t kx = 0; kx < g.kw; ++kx) {
        S* row = col + ((ic * g.kh + ky) * g.kw + kx) * n;
        for (int64_t oy = 0; oy < g.oh; ++oy) {
          const int64_t sy = oy * g.stride - g.pad + ky;
          S* dst = row + oy * g.ow;
          if (sy < 0 || sy >= g.h) {
            std::fill(dst, dst + g.ow, S(0));
            continue;
          }
          const S* src = plane + sy * g.w;
          for (int64_t ox = 0; ox < g.ow; ++ox) {
            const int64_t sx = ox * g.stride - g.pad + kx;
            dst[ox] = (sx >= 0 && sx < g.w) ? src[sx] : S(0);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const S* col, const ConvGeom& g, S* x) {
  const int64_t n = g.col_cols();
  for (int64_t ic = 0; ic < g.ic; ++ic) {
    S* plane = x + ic * g.h * g.w;
    for (int64_t ky = 0; ky < g.kh; ++ky) {
      for (int64_t kx = 0; kx < g.kw; ++kx) {
        const S* row = col + ((ic * g.kh + ky) * g.kw + kx) * n;
        for (int64_t oy = 0; oy < g.oh; ++oy) {
          const int64_t sy = oy * g.stride - g.pad + ky;
          if (sy < 0 || sy >= g.h) continue;
          const S* src = row + oy * g.ow;
          S* dst = plane + sy * g.w;
          for (int64_t ox = 0; ox < g.ow; ++ox) {
            const int64_t sx = ox * g.stride - g.pad + kx;
            if (sx >= 0 && sx < g.w) dst[sx] += src[ox];
          }
        }
      }
    }
  }
}

// y(OC x N) = w(OC x K) * im2col(x)(K x N)
template <typename S>
void conv_fwd_raw(const S* x, const S* w, int64_t oc, const ConvGeom& g, S* y) {
  std::vector<S> col(g.col_rows() * g.col_cols());
  im2col(x, g, col.data());
  ConstMatMap<S> wm(w, oc, g.col_rows());
  ConstMatMap<S> cm(col.data(), g.col_rows(), g.col_cols());
  MatMap<S> ym(y, oc, g.col_cols());
  ym.noalias() = wm * cm;
}

// gx += col2im(w^T * gy)
template <typename S>
void conv_bwd_data_raw(const S* gy, const S* w, int64_t oc, const ConvGeom& g, S* gx) {
  std::vector<S> col(g.col_rows() * g.col_cols());
  ConstMatMap<S> wm(w, oc, g.col_rows());
  ConstMatMap<S> gym(gy, oc, g.col_cols());
  MatMap<S> cm(col.data(), g.col_rows(), g.col_cols());
  cm.noalias() = wm.transpose() * gym;
  col2im_add(col.data(), g, gx);
}

// gw += gy * im2col(x)^T
template <typename S>
void conv_bwd_weight_raw(const S* x, const S* gy, int64_t oc, const ConvGeom& g, S* gw) {
  std::vector<S> col(g.col_rows() * g.col_cols());
  im2col(x, g, col.data());
  ConstMatMap<S> gym(gy, oc, g.col_cols());
  ConstMatMap<S> cm(col.data(), g.col_rows(), g.col_cols());
  MatMap<S> gwm(gw, oc, g.col_rows());
  gwm.noalias() += gym * cm.transpose();
}

// y += w(OC x K) * im2col(x): accumulate variant used by tconv backward.
template <typename S>
void conv_fwd_raw_accum(const S* x, const S* w, int64_t oc, const ConvGeom& g, S* y) {
  std::vector<S> col(g.col_rows() * g.col_cols());
  im2col(x, g, col.data());
  ConstMatMap<S> wm(w, oc, g.col_rows());
  ConstMatMap<S> cm(col.data(), g.col_rows(), g.col_cols());
  MatMap<S> ym(y, oc, g.col_cols());
  ym.noalias() += wm * cm;
}

}  // namespace detail

// ---- convolution ----

// x: {IC,H,W}, w: {OC,IC,KH,KW}, b: {OC} or undefined.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                 int64_t stride = 1, int64_t pad = -1) {
  STINET_CHECK(x.ndim() == 3 && w.ndim() == 4, "conv2d: rank mismatch");
  STINET_CHECK(x.dim(0) == w.dim(1), "conv2d: channel mismatch");
  if (pad < 0) pad = w.dim(2) / 2;
  const int64_t oc = w.dim(0);
  auto g = detail::ConvGeom::forward(x.dim(0), x.dim(1), x.dim(2), w.dim(2), w.dim(3), stride, pad);

  std::vector<Tensor<S>> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  auto xi = x.handle();
  auto wi = w.handle();
  auto bi = b.defined() ? b.handle() : nullptr;
  auto out = detail::make_node<S>({oc, g.oh, g.ow}, parents, [xi, wi, bi, oc, g](TensorImpl<S>* o) {
    const S* gy = o->grad.data();
    if (wi->requires_grad) {
      detail::conv_bwd_weight_raw(xi->value->data(), gy, oc, g,
                                  Tensor<S>::ensure_grad(*wi).data());
    }
    if (bi && bi->requires_grad) {
      auto& gb = Tensor<S>::ensure_grad(*bi);
      const int64_t n = g.col_cols();
      for (int64_t c = 0; c < oc; ++c) {
        S acc = 0;
        for (int64_t i = 0; i < n; ++i) acc += gy[c * n + i];
        gb[c] += acc;
      }
    }
    if (xi->requires_grad) {
      detail::conv_bwd_data_raw(gy, wi->value->data(), oc, g, Tensor<S>::ensure_grad(*xi).data());
    }
  });
  detail::conv_fwd_raw(x.data(), w.data(), oc, g, out.data());
  if (b.defined()) {
    S* y = out.data();
    const S* pb = b.data();
    const int64_t n = g.col_cols();
    for (int64_t c = 0; c < oc; ++c)
      for (int64_t i = 0; i < n; ++i) y[c * n + i] += pb[c];
  }
  return out;
}

// Transposed convolution; w: {IC,OC,KH,KW}. out = (in-1)*stride - 2*pad + k.
template <typename S>
Tensor<S> conv_transpose2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                           int64_t stride, int64_t pad) {
  STINET_CHECK(x.ndim() == 3 && w.ndim() == 4, "conv_transpose2d: rank mismatch");
  STINET_CHECK(x.dim(0) == w.dim(0), "conv_transpose2d: channel mismatch");
  const int64_t ic = w.dim(0), oc = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int64_t oh = (x.dim(1) - 1) * stride - 2 * pad + kh;
  const int64_t ow = (x.dim(2) - 1) * stride - 2 * pad + kw;
  // Geometry of the conv whose data-gradient equals this forward pass.
  auto g = detail::ConvGeom::forward(oc, oh, ow, kh, kw, stride, pad);
  STINET_CHECK(g.oh == x.dim(1) && g.ow == x.dim(2), "conv_transpose2d: geometry mismatch");

  std::vector<Tensor<S>> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  auto xi = x.handle();
  auto wi = w.handle();
  auto bi = b.defined() ? b.handle() : nullptr;
  auto out = detail::make_node<S>({oc, oh, ow}, parents, [xi, wi, bi, ic, oc, g](TensorImpl<S>* o) {
    const S* gy = o->grad.data();
    if (xi->requires_grad) {
      detail::conv_fwd_raw_accum(gy, wi->value->data(), ic, g, Tensor<S>::ensure_grad(*xi).data());
    }
    if (wi->requires_grad) {
      detail::conv_bwd_weight_raw(gy, xi->value->data(), ic, g, Tensor<S>::ensure_grad(*wi).data());
    }
    if (bi && bi->requires_grad) {
      auto& gb = Tensor<S>::ensure_grad(*bi);
      const int64_t n = g.h * g.w;
      for (int64_t c = 0; c < oc; ++c) {
        S acc = 0;
        for (int64_t i = 0; i < n; ++i) acc += gy[c * n + i];
        gb[c] += acc;
      }
    }
  });
  // Forward: scatter x through the kernel (conv data-gradient with roles swapped).
  detail::conv_bwd_data_raw(x.data(), w.data(), ic, g, out.data());
  if (b.defined()) {
    S* y = out.data();
    const S* pb = b.data();
    const int64_t n = oh * ow;
    for (int64_t c = 0; c < oc; ++c)
      for (int64_t i = 0; i < n; ++i) y[c * n + i] += pb[c];
  }
  return out;
}

// ---- channel concat / resize / shuffle / pooling ----

template <typename S>
Tensor<S> concat_ch(const std::vector<Tensor<S>>& xs) {
  STINET_CHECK(!xs.empty(), "concat_ch: empty input");
  const int64_t h = xs[0].dim(1), w = xs[0].dim(2);
  int64_t ctot = 0;
  for (const auto& x : xs) {
    STINET_CHECK(x.ndim() == 3 && x.dim(1) == h && x.dim(2) == w, "concat_ch: spatial mismatch");
    ctot += x.dim(0);
  }
  std::vector<std::shared_ptr<TensorImpl<S>>> his;
  for (const auto& x : xs) his.push_back(x.handle());
  auto out = detail::make_node<S>({ctot, h, w}, xs, [his, h, w](TensorImpl<S>* o) {
    int64_t off = 0;
    const int64_t plane = h * w;
    for (auto& hi : his) {
      const int64_t n = hi->shape[0] * plane;
      if (hi->requires_grad) {
        auto& g = Tensor<S>::ensure_grad(*hi);
        for (int64_t i = 0; i < n; ++i) g[i] += o->grad[off + i];
      }
      off += n;
    }
  });
  S* po = out.data();
  for (const auto& x : xs) {
    std::copy(x.data(), x.data() + x.numel(), po);
    po += x.numel();
  }
  return out;
}

// Bilinear resize with half-pixel centers (align_corners=false), edge clamped.
template <typename S>
Tensor<S> resize_bilinear(const Tensor<S>& x, int64_t oh, int64_t ow) {
  STINET_CHECK(x.ndim() == 3, "resize_bilinear: rank mismatch");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (oh == h && ow == w) return add_scalar(x, S(0));
  const double sy = double(h) / double(oh);
  const double sx = double(w) / double(ow);

  struct Tap {
    int64_t i0, i1;
    S w1;  // weight of i1; weight of i0 is 1-w1
  };
  std::vector<Tap> ty(oh), tx(ow);
  auto make_tap = [](int64_t o, double s, int64_t n) {
    double src = (double(o) + 0.5) * s - 0.5;
    src = std::max(0.0, std::min(src, double(n - 1)));
    int64_t i0 = int64_t(std::floor(src));
    int64_t i1 = std::min(i0 + 1, n - 1);
    return Tap{i0, i1, S(src - double(i0))};
  };
  for (int64_t o = 0; o < oh; ++o) ty[o] = make_tap(o, sy, h);
  for (int64_t o = 0; o < ow; ++o) tx[o] = make_tap(o, sx, w);

  auto xi = x.handle();
  auto out =
      detail::make_node<S>({c, oh, ow}, {x}, [xi, ty, tx, c, h, w, oh, ow](TensorImpl<S>* o) {
        if (!xi->requires_grad) return;
        auto& g = Tensor<S>::ensure_grad(*xi);
        for (int64_t ch = 0; ch < c; ++ch) {
          S* gp = g.data() + ch * h * w;
          const S* go = o->grad.data() + ch * oh * ow;
          for (int64_t y = 0; y < oh; ++y) {
            const auto& a = ty[y];
            for (int64_t xo = 0; xo < ow; ++xo) {
              const auto& b = tx[xo];
              const S gv = go[y * ow + xo];
              gp[a.i0 * w + b.i0] += gv * (S(1) - a.w1) * (S(1) - b.w1);
              gp[a.i0 * w + b.i1] += gv * (S(1) - a.w1) * b.w1;
              gp[a.i1 * w + b.i0] += gv * a.w1 * (S(1) - b.w1);
              gp[a.i1 * w + b.i1] += gv * a.w1 * b.w1;
            }
          }
        }
      });
  S* po = out.data();
  const S* px = x.data();
  for (int64_t ch = 0; ch < c; ++ch) {
    const S* plane = px + ch * h * w;
    for (int64_t y = 0; y < oh; ++y) {
      const auto& a = ty[y];
      for (int64_t xo = 0; xo < ow; ++xo) {
        const auto& b = tx[xo];
        S v00 = plane[a.i0 * w + b.i0], v01 = plane[a.i0 * w + b.i1];
        S v10 = plane[a.i1 * w + b.i0], v11 = plane[a.i1 * w + b.i1];
        S top = v00 + (v01 - v00) * b.w1;
        S bot = v10 + (v11 - v10) * b.w1;
        *po++ = top + (bot - top) * a.w1;
      }
    }
  }
  return out;
}

// Sub-pixel rearrangement: out[ch, r*y+dy, r*x+dx] = in[ch*r^2 + dy*r + dx, y, x].
template <typename S>
Tensor<S> pixel_shuffle(const Tensor<S>& x, int64_t r) {
  STINET_CHECK(x.ndim() == 3, "pixel_shuffle: rank mismatch");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  STINET_CHECK(c % (r * r) == 0, "pixel_shuffle: channels not divisible by r^2");
  const int64_t oc = c / (r * r), oh = h * r, ow = w * r;
  auto xi = x.handle();
  auto out = detail::make_node<S>({oc, oh, ow}, {x}, [xi, r, oc, h, w, oh, ow](TensorImpl<S>* o) {
    if (!xi->requires_grad) return;
    auto& g = Tensor<S>::ensure_grad(*xi);
    for (int64_t ch = 0; ch < oc; ++ch)
      for (int64_t dy = 0; dy < r; ++dy)
        for (int64_t dx = 0; dx < r; ++dx) {
          const int64_t ci = (ch * r + dy) * r + dx;
          for (int64_t y = 0; y < h; ++y)
            for (int64_t x2 = 0; x2 < w; ++x2)
              g[(ci * h + y) * w + x2] += o->grad[(ch * oh + (r * y + dy)) * ow + (r * x2 + dx)];
        }
  });
  const S* px = x.data();
  S* po = out.data();
  for (int64_t ch = 0; ch < oc; ++ch)
    for (int64_t dy = 0; dy < r; ++dy)
      for (int64_t dx = 0; dx < r; ++dx) {
        const int64_t ci = (ch * r + dy) * r + dx;
        for (int64_t y = 0; y < h; ++y)
          for (int64_t x2 = 0; x2 < w; ++x2)
            po[(ch * oh + (r * y + dy)) * ow + (r * x2 + dx)] = px[(ci * h + y) * w + x2];
      }
  return out;
}

template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
  STINET_CHECK(x.ndim() == 3, "global_avg_pool: rank mismatch");
  const int64_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  const S inv = S(1) / S(n);
  auto xi = x.handle();
  auto out = detail::make_node<S>({c}, {x}, [xi, c, n, inv](TensorImpl<S>* o) {
    if (!xi->requires_grad) return;
    auto& g = Tensor<S>::ensure_grad(*xi);
    for (int64_t ch = 0; ch < c; ++ch) {
      const S gv = o->grad[ch] * inv;
      for (int64_t i = 0; i < n; ++i) g[ch * n + i] += gv;
    }
  });
  const S* px = x.data();
  S* po = out.data();
  for (int64_t ch = 0; ch < c; ++ch) {
    S acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += px[ch * n + i];
    po[ch] = acc * inv;
  }
  return out;
}

// x: {N}, w: {M,N}, b: {M} or undefined -> {M}
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  STINET_CHECK(x.ndim() == 1 && w.ndim() == 2 && w.dim(1) == x.dim(0), "linear: shape mismatch");
  const int64_t m = w.dim(0), n = w.dim(1);
  std::vector<Tensor<S>> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  auto xi = x.handle();
  auto wi = w.handle();
  auto bi = b.defined() ? b.handle() : nullptr;
  auto out = detail::make_node<S>({m}, parents, [xi, wi, bi, m, n](TensorImpl<S>* o) {
    const auto& vx = *xi->value;
    const auto& vw = *wi->value;
    if (xi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*xi);
      for (int64_t j = 0; j < n; ++j) {
        S acc = 0;
        for (int64_t i = 0; i < m; ++i) acc += o->grad[i] * vw[i * n + j];
        g[j] += acc;
      }
    }
    if (wi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*wi);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) g[i * n + j] += o->grad[i] * vx[j];
    }
    if (bi && bi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*bi);
      for (int64_t i = 0; i < m; ++i) g[i] += o->grad[i];
    }
  });
  const S* px = x.data();
  const S* pw = w.data();
  S* po = out.data();
  for (int64_t i = 0; i < m; ++i) {
    S acc = b.defined() ? b.data()[i] : S(0);
    for (int64_t j = 0; j < n; ++j) acc += pw[i * n + j] * px[j];
    po[i] = acc;
  }
  return out;
}

// Concatenate two vectors {N1},{N2} -> {N1+N2} (GraphSAGE update input).
template <typename S>
Tensor<S> concat_vec(const Tensor<S>& a, const Tensor<S>& b) {
  STINET_CHECK(a.ndim() == 1 && b.ndim() == 1, "concat_vec: rank mismatch");
  auto ai = a.handle();
  auto bi = b.handle();
  const int64_t na = a.numel(), nb = b.numel();
  auto out = detail::make_node<S>({na + nb}, {a, b}, [ai, bi, na, nb](TensorImpl<S>* o) {
    if (ai->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*ai);
      for (int64_t i = 0; i < na; ++i) g[i] += o->grad[i];
    }
    if (bi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*bi);
      for (int64_t i = 0; i < nb; ++i) g[i] += o->grad[na + i];
    }
  });
  std::copy(a.data(), a.data() + na, out.data());
  std::copy(b.data(), b.data() + nb, out.data() + na);
  return out;
}

// Per-channel scaling: out[ch,y,x] = x[ch,y,x] * v[ch].
template <typename S>
Tensor<S> channel_mul(const Tensor<S>& x, const Tensor<S>& v) {
  STINET_CHECK(x.ndim() == 3 && v.ndim() == 1 && v.dim(0) == x.dim(0),
               "channel_mul: shape mismatch");
  const int64_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  auto xi = x.handle();
  auto vi = v.handle();
  auto out = detail::make_node<S>(x.shape(), {x, v}, [xi, vi, c, n](TensorImpl<S>* o) {
    const auto& vx = *xi->value;
    const auto& vv = *vi->value;
    if (xi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*xi);
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < n; ++i) g[ch * n + i] += o->grad[ch * n + i] * vv[ch];
    }
    if (vi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*vi);
      for (int64_t ch = 0; ch < c; ++ch) {
        S acc = 0;
        for (int64_t i = 0; i < n; ++i) acc += o->grad[ch * n + i] * vx[ch * n + i];
        g[ch] += acc;
      }
    }
  });
  const S* px = x.data();
  const S* pv = v.data();
  S* po = out.data();
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < n; ++i) po[ch * n + i] = px[ch * n + i] * pv[ch];
  return out;
}

// ---- differentiable sampling ----

// Backward warping: out[c,y,x] = map(c, y + flow[1,y,x], x + flow[0,y,x]).
// flow channel 0 is the x displacement, channel 1 the y displacement.
// Sample coordinates are clamped to the border; clamped coordinates get
// zero positional gradient.
template <typename S>
Tensor<S> warp_bilinear(const Tensor<S>& map, const Tensor<S>& flow) {
  STINET_CHECK(map.ndim() == 3 && flow.ndim() == 3 && flow.dim(0) == 2,
               "warp_bilinear: rank mismatch");
  STINET_CHECK(map.dim(1) == flow.dim(1) && map.dim(2) == flow.dim(2),
               "warp_bilinear: flow shape must match map");
  const int64_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  const int64_t plane = h * w;
  auto mi = map.handle();
  auto fi = flow.handle();

  auto compute = [c, h, w, plane](const S* pm, const S* pf, S* po, TensorImpl<S>* o,
                                  TensorImpl<S>* mip, TensorImpl<S>* fip) {
    const bool bwd = o != nullptr;
    S* gm = nullptr;
    S* gf = nullptr;
    if (bwd && mip->requires_grad) gm = Tensor<S>::ensure_grad(*mip).data();
    if (bwd && fip->requires_grad) gf = Tensor<S>::ensure_grad(*fip).data();
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const int64_t i = y * w + x;
        double sx = double(x) + double(pf[i]);
        double sy = double(y) + double(pf[plane + i]);
        const bool cx = sx < 0 || sx > double(w - 1);
        const bool cy = sy < 0 || sy > double(h - 1);
        sx = std::max(0.0, std::min(sx, double(w - 1)));
        sy = std::max(0.0, std::min(sy, double(h - 1)));
        const int64_t x0 = int64_t(std::floor(sx)), y0 = int64_t(std::floor(sy));
        const int64_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        const S ax = S(sx - double(x0)), ay = S(sy - double(y0));
        for (int64_t ch = 0; ch < c; ++ch) {
          const S* pl = pm + ch * plane;
          const S v00 = pl[y0 * w + x0], v01 = pl[y0 * w + x1];
          const S v10 = pl[y1 * w + x0], v11 = pl[y1 * w + x1];
          if (!bwd) {
            const S top = v00 + (v01 - v00) * ax;
            const S bot = v10 + (v11 - v10) * ax;
            po[ch * plane + i] = top + (bot - top) * ay;
          } else {
            const S gv = o->grad[ch * plane + i];
            if (gm) {
              gm[ch * plane + y0 * w + x0] += gv * (S(1) - ax) * (S(1) - ay);
              gm[ch * plane + y0 * w + x1] += gv * ax * (S(1) - ay);
              gm[ch * plane + y1 * w + x0] += gv * (S(1) - ax) * ay;
              gm[ch * plane + y1 * w + x1] += gv * ax * ay;
            }
            if (gf) {
              const S dvx = (v01 - v00) * (S(1) - ay) + (v11 - v10) * ay;
              const S dvy = (v10 - v00) * (S(1) - ax) + (v11 - v01) * ax;
              if (!cx) gf[i] += gv * dvx;
              if (!cy) gf[plane + i] += gv * dvy;
            }
          }
        }
      }
    }
  };

  auto out = detail::make_node<S>(map.shape(), {map, flow}, [mi, fi, compute](TensorImpl<S>* o) {
    compute(mi->value->data(), fi->value->data(), nullptr, o, mi.get(), fi.get());
  });
  compute(map.data(), flow.data(), out.data(), nullptr, nullptr, nullptr);
  return out;
}

// Deformable 3x3 convolution with one offset group, padding 1, stride 1.
// offsets: {18,H,W}; channel 2k is the x offset and 2k+1 the y offset of
// tap k = ky*3+kx (tap base (kx-1, ky-1)). Samples use bilinear
// interpolation with zeros outside the border, matching the zero-padded
// plain convolution when all offsets vanish.
template <typename S>
Tensor<S> deform_conv3x3(const Tensor<S>& x, const Tensor<S>& off, const Tensor<S>& w,
                         const Tensor<S>& b) {
  STINET_CHECK(x.ndim() == 3 && off.ndim() == 3 && w.ndim() == 4, "deform_conv3x3: rank");
  STINET_CHECK(off.dim(0) == 18 && w.dim(2) == 3 && w.dim(3) == 3, "deform_conv3x3: 3x3/K=9 only");
  STINET_CHECK(off.dim(1) == x.dim(1) && off.dim(2) == x.dim(2), "deform_conv3x3: offset shape");
  STINET_CHECK(w.dim(1) == x.dim(0), "deform_conv3x3: channel mismatch");
  const int64_t ic = x.dim(0), h = x.dim(1), bw = x.dim(2), oc = w.dim(0);
  const int64_t plane = h * bw;

  std::vector<Tensor<S>> parents = {x, off, w};
  if (b.defined()) parents.push_back(b);
  auto xi = x.handle();
  auto oi = off.handle();
  auto wi = w.handle();
  auto bi = b.defined() ? b.handle() : nullptr;

  auto run = [ic, h, bw, oc, plane](const S* px, const S* poff, const S* pw, const S* pb, S* py,
                                    TensorImpl<S>* o, S* gx, S* goff, S* gw, S* gb) {
    const bool bwd = o != nullptr;
    std::vector<S> val(9 * ic);
    std::vector<S> gval;
    if (bwd) gval.resize(9 * ic);
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x2 = 0; x2 < bw; ++x2) {
        const int64_t i = y * bw + x2;
        // gather the 9 sampled input vectors
        struct Corner {
          int64_t x0, y0;
          S ax, ay;
        } cor[9];
        for (int64_t k = 0; k < 9; ++k) {
          const int64_t ky = k / 3 - 1, kx = k % 3 - 1;
          const double sx = double(x2 + kx) + double(poff[(2 * k) * plane + i]);
          const double sy = double(y + ky) + double(poff[(2 * k + 1) * plane + i]);
          const int64_t x0 = int64_t(std::floor(sx)), y0 = int64_t(std::floor(sy));
          cor[k] = {x0, y0, S(sx - double(x0)), S(sy - double(y0))};
          for (int64_t c = 0; c < ic; ++c) {
            const S* pl = px + c * plane;
            auto at = [&](int64_t yy, int64_t xx) -> S {
              return (yy >= 0 && yy < h && xx >= 0 && xx < bw) ? pl[yy * bw + xx] : S(0);
            };
            const S v00 = at(y0, x0), v01 = at(y0, x0 + 1);
            const S v10 = at(y0 + 1, x0), v11 = at(y0 + 1, x0 + 1);
            const S top = v00 + (v01 - v00) * cor[k].ax;
            const S bot = v10 + (v11 - v10) * cor[k].ax;
            val[k * ic + c] = top + (bot - top) * cor[k].ay;
          }
        }
        if (!bwd) {
          for (int64_t c = 0; c < oc; ++c) {
            S acc = pb ? pb[c] : S(0);
            const S* wr = pw + c * ic * 9;
            for (int64_t ci = 0; ci < ic; ++ci)
              for (int64_t k = 0; k < 9; ++k) acc += wr[ci * 9 + k] * val[k * ic + ci];
            py[c * plane + i] = acc;
          }
        } else {
          std::fill(gval.begin(), gval.end(), S(0));
          for (int64_t c = 0; c < oc; ++c) {
            const S gy = o->grad[c * plane + i];
            const S* wr = pw + c * ic * 9;
            if (gb) gb[c] += gy;
            for (int64_t ci = 0; ci < ic; ++ci)
              for (int64_t k = 0; k < 9; ++k) {
                if (gw) gw[(c * ic + ci) * 9 + k] += gy * val[k * ic + ci];
                gval[k * ic + ci] += gy * wr[ci * 9 + k];
              }
          }
          for (int64_t k = 0; k < 9; ++k) {
            const auto& cr = cor[k];
            S gox = 0, goy = 0;
            for (int64_t c = 0; c < ic; ++c) {
              const S gv = gval[k * ic + c];
              if (gv == S(0)) continue;
              const S* pl = px + c * plane;
              auto at = [&](int64_t yy, int64_t xx) -> S {
                return (yy >= 0 && yy < h && xx >= 0 && xx < bw) ? pl[yy * bw + xx] : S(0);
              };
              const S v00 = at(cr.y0, cr.x0), v01 = at(cr.y0, cr.x0 + 1);
              const S v10 = at(cr.y0 + 1, cr.x0), v11 = at(cr.y0 + 1, cr.x0 + 1);
              if (gx) {
                auto scatter = [&](int64_t yy, int64_t xx, S wgt) {
                  if (yy >= 0 && yy < h && xx >= 0 && xx < bw)
                    gx[c * plane + yy * bw + xx] += gv * wgt;
                };
                scatter(cr.y0, cr.x0, (S(1) - cr.ax) * (S(1) - cr.ay));
                scatter(cr.y0, cr.x0 + 1, cr.ax * (S(1) - cr.ay));
                scatter(cr.y0 + 1, cr.x0, (S(1) - cr.ax) * cr.ay);
                scatter(cr.y0 + 1, cr.x0 + 1, cr.ax * cr.ay);
              }
              gox += gv * ((v01 - v00) * (S(1) - cr.ay) + (v11 - v10) * cr.ay);
              goy += gv * ((v10 - v00) * (S(1) - cr.ax) + (v11 - v01) * cr.ax);
            }
            if (goff) {
              goff[(2 * k) * plane + i] += gox;
              goff[(2 * k + 1) * plane + i] += goy;
            }
          }
        }
      }
    }
  };

  auto out = detail::make_node<S>({oc, h, bw}, parents, [xi, oi, wi, bi, run](TensorImpl<S>* o) {
    S* gx = xi->requires_grad ? Tensor<S>::ensure_grad(*xi).data() : nullptr;
    S* goff = oi->requires_grad ? Tensor<S>::ensure_grad(*oi).data() : nullptr;
    S* gw = wi->requires_grad ? Tensor<S>::ensure_grad(*wi).data() : nullptr;
    S* gb = (bi && bi->requires_grad) ? Tensor<S>::ensure_grad(*bi).data() : nullptr;
    run(xi->value->data(), oi->value->data(), wi->value->data(),
        bi ? bi->value->data() : nullptr, nullptr, o, gx, goff, gw, gb);
  });
  run(x.data(), off.data(), w.data(), b.defined() ? b.data() : nullptr, out.data(), nullptr,
      nullptr, nullptr, nullptr, nullptr);
  return out;
}

// ---- similarity ----

// Cosine similarity of two vectors; zero-norm inputs yield 0 (and no
// gradient) so degenerate all-zero features stay NaN-free.
template <typename S>
Tensor<S> cosine_vec(const Tensor<S>& a, const Tensor<S>& b) {
  STINET_CHECK(a.ndim() == 1 && detail::same_shape(a, b), "cosine_vec: shape mismatch");
  const int64_t n = a.numel();
  auto ai = a.handle();
  auto bi = b.handle();
  auto out = detail::make_node<S>({1}, {a, b}, [ai, bi, n](TensorImpl<S>* o) {
    const auto& va = *ai->value;
    const auto& vb = *bi->value;
    S dot = 0, na2 = 0, nb2 = 0;
    for (int64_t i = 0; i < n; ++i) {
      dot += va[i] * vb[i];
      na2 += va[i] * va[i];
      nb2 += vb[i] * vb[i];
    }
    const S na = std::sqrt(na2), nb = std::sqrt(nb2);
    if (na < S(1e-12) || nb < S(1e-12)) return;
    const S inv = S(1) / (na * nb);
    const S cosv = dot * inv;
    const S g = o->grad[0];
    if (ai->requires_grad) {
      auto& ga = Tensor<S>::ensure_grad(*ai);
      for (int64_t i = 0; i < n; ++i) ga[i] += g * (vb[i] * inv - cosv * va[i] / na2);
    }
    if (bi->requires_grad) {
      auto& gb = Tensor<S>::ensure_grad(*bi);
      for (int64_t i = 0; i < n; ++i) gb[i] += g * (va[i] * inv - cosv * vb[i] / nb2);
    }
  });
  const S* pa = a.data();
  const S* pb = b.data();
  S dot = 0, na2 = 0, nb2 = 0;
  for (int64_t i = 0; i < n; ++i) {
    dot += pa[i] * pb[i];
    na2 += pa[i] * pa[i];
    nb2 += pb[i] * pb[i];
  }
  const S na = std::sqrt(na2), nb = std::sqrt(nb2);
  out.data()[0] = (na < S(1e-12) || nb < S(1e-12)) ? S(0) : dot / (na * nb);
  return out;
}

// Mean over spatial positions of the per-pixel channel-vector cosine.
template <typename S>
Tensor<S> pixel_cosine_mean(const Tensor<S>& a, const Tensor<S>& b) {
  STINET_CHECK(a.ndim() == 3 && detail::same_shape(a, b), "pixel_cosine_mean: shape mismatch");
  const int64_t c = a.dim(0), n = a.dim(1) * a.dim(2);
  auto ai = a.handle();
  auto bi = b.handle();
  auto out = detail::make_node<S>({1}, {a, b}, [ai, bi, c, n](TensorImpl<S>* o) {
    const auto& va = *ai->value;
    const auto& vb = *bi->value;
    const S g = o->grad[0] / S(n);
    S* ga = ai->requires_grad ? Tensor<S>::ensure_grad(*ai).data() : nullptr;
    S* gb = bi->requires_grad ? Tensor<S>::ensure_grad(*bi).data() : nullptr;
    for (int64_t i = 0; i < n; ++i) {
      S dot = 0, na2 = 0, nb2 = 0;
      for (int64_t ch = 0; ch < c; ++ch) {
        const S x = va[ch * n + i], y = vb[ch * n + i];
        dot += x * y;
        na2 += x * x;
        nb2 += y * y;
      }
      const S na = std::sqrt(na2), nb = std::sqrt(nb2);
      if (na < S(1e-12) || nb < S(1e-12)) continue;
      const S inv = S(1) / (na * nb);
      const S cosv = dot * inv;
      for (int64_t ch = 0; ch < c; ++ch) {
        const S x = va[ch * n + i], y = vb[ch * n + i];
        if (ga) ga[ch * n + i] += g * (y * inv - cosv * x / na2);
        if (gb) gb[ch * n + i] += g * (x * inv - cosv * y / nb2);
      }
    }
  });
  const S* pa = a.data();
  const S* pb = b.data();
  S acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    S dot = 0, na2 = 0, nb2 = 0;
    for (int64_t ch = 0; ch < c; ++ch) {
      const S x = pa[ch * n + i], y = pb[ch * n + i];
      dot += x * y;
      na2 += x * x;
      nb2 += y * y;
    }
    const S na = std::sqrt(na2), nb = std::sqrt(nb2);
    if (na >= S(1e-12) && nb >= S(1e-12)) acc += dot / (na * nb);
  }
  out.data()[0] = acc / S(n);
  return out;
}

// ---- loss kernels ----

// Mean squared error; gradient is 2(a-b)/count.
template <typename S>
Tensor<S> mse_mean(const Tensor<S>& a, const Tensor<S>& b) {
  STINET_CHECK(detail::same_shape(a, b), "mse_mean: shape mismatch");
  const int64_t n = a.numel();
  const S inv = S(1) / S(n);
  auto ai = a.handle();
  auto bi = b.handle();
  auto out = detail::make_node<S>({1}, {a, b}, [ai, bi, n, inv](TensorImpl<S>* o) {
    const auto& va = *ai->value;
    const auto& vb = *bi->value;
    const S g = o->grad[0] * S(2) * inv;
    if (ai->requires_grad) {
      auto& ga = Tensor<S>::ensure_grad(*ai);
      for (int64_t i = 0; i < n; ++i) ga[i] += g * (va[i] - vb[i]);
    }
    if (bi->requires_grad) {
      auto& gb = Tensor<S>::ensure_grad(*bi);
      for (int64_t i = 0; i < n; ++i) gb[i] -= g * (va[i] - vb[i]);
    }
  });
  const S* pa = a.data();
  const S* pb = b.data();
  S acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    const S d = pa[i] - pb[i];
    acc += d * d;
  }
  out.data()[0] = acc * inv;
  return out;
}

template <typename S>
Tensor<S> l1_mean(const Tensor<S>& a, const Tensor<S>& b) {
  STINET_CHECK(detail::same_shape(a, b), "l1_mean: shape mismatch");
  const int64_t n = a.numel();
  const S inv = S(1) / S(n);
  auto ai = a.handle();
  auto bi = b.handle();
  auto out = detail::make_node<S>({1}, {a, b}, [ai, bi, n, inv](TensorImpl<S>* o) {
    const auto& va = *ai->value;
    const auto& vb = *bi->value;
    const S g = o->grad[0] * inv;
    for (int64_t i = 0; i < n; ++i) {
      const S d = va[i] - vb[i];
      const S s = d > S(0) ? S(1) : (d < S(0) ? S(-1) : S(0));
      if (ai->requires_grad) Tensor<S>::ensure_grad(*ai)[i] += g * s;
      if (bi->requires_grad) Tensor<S>::ensure_grad(*bi)[i] -= g * s;
    }
  });
  const S* pa = a.data();
  const S* pb = b.data();
  S acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += std::abs(pa[i] - pb[i]);
  out.data()[0] = acc * inv;
  return out;
}

// Motion-accumulation hinge: mean over elements of
// max(sgn(shortf) * (shortf - longf), 0), with sgn(0) = 0. The sign is
// treated as a constant in the backward pass.
template <typename S>
Tensor<S> rel_hinge_mean(const Tensor<S>& shortf, const Tensor<S>& longf) {
  STINET_CHECK(detail::same_shape(shortf, longf), "rel_hinge_mean: shape mismatch");
  const int64_t n = shortf.numel();
  const S inv = S(1) / S(n);
  auto ai = shortf.handle();
  auto bi = longf.handle();
  auto out = detail::make_node<S>({1}, {shortf, longf}, [ai, bi, n, inv](TensorImpl<S>* o) {
    const auto& va = *ai->value;
    const auto& vb = *bi->value;
    const S g = o->grad[0] * inv;
    S* ga = ai->requires_grad ? Tensor<S>::ensure_grad(*ai).data() : nullptr;
    S* gb = bi->requires_grad ? Tensor<S>::ensure_grad(*bi).data() : nullptr;
    for (int64_t i = 0; i < n; ++i) {
      const S s = va[i] > S(0) ? S(1) : (va[i] < S(0) ? S(-1) : S(0));
      if (s * (va[i] - vb[i]) > S(0)) {
        if (ga) ga[i] += g * s;
        if (gb) gb[i] -= g * s;
      }
    }
  });
  const S* pa = shortf.data();
  const S* pb = longf.data();
  S acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    const S s = pa[i] > S(0) ? S(1) : (pa[i] < S(0) ? S(-1) : S(0));
    acc += std::max(s * (pa[i] - pb[i]), S(0));
  }
  out.data()[0] = acc * inv;
  return out;
}

}  // namespace stinet
