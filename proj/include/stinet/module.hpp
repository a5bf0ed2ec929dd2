#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stinet/ops.hpp"
#include "stinet/rng.hpp"

namespace stinet {

enum class ResLevel { LR, HR };

// He (Kaiming) normal fill: std = sqrt(2 / fan_in).
template <typename S>
void kaiming_fill(Tensor<S>& w, int64_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / double(fan_in));
  for (auto& v : w.values()) v = S(rng.normal(0.0, stddev));
}

// Conv layer; zero_init selects the identity-preserving heads (offset
// predictors, Inet outputs, final fusion/projection layers).
template <typename S>
struct Conv {
  Tensor<S> w, b;
  int64_t stride = 1;
  int64_t pad = -1;

  static Conv make(int64_t oc, int64_t ic, int64_t k, Rng& rng, bool zero_init = false,
                   int64_t stride = 1, int64_t pad = -1) {
    Conv c;
    c.w = Tensor<S>::zeros({oc, ic, k, k}, true);
    c.b = Tensor<S>::zeros({oc}, true);
    if (!zero_init) kaiming_fill(c.w, ic * k * k, rng);
    c.stride = stride;
    c.pad = pad;
    return c;
  }

  Tensor<S> operator()(const Tensor<S>& x) const { return conv2d(x, w, b, stride, pad); }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".w", w);
    f(p + ".b", b);
  }
};

template <typename S>
struct TConv {
  Tensor<S> w, b;  // {IC,OC,K,K}
  int64_t stride = 2;
  int64_t pad = 1;

  static TConv make(int64_t ic, int64_t oc, int64_t k, Rng& rng, int64_t stride = 2,
                    int64_t pad = 1) {
    TConv c;
    c.w = Tensor<S>::zeros({ic, oc, k, k}, true);
    c.b = Tensor<S>::zeros({oc}, true);
    kaiming_fill(c.w, ic * k * k, rng);
    c.stride = stride;
    c.pad = pad;
    return c;
  }

  Tensor<S> operator()(const Tensor<S>& x) const { return conv_transpose2d(x, w, b, stride, pad); }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".w", w);
    f(p + ".b", b);
  }
};

// Pre-activation-free residual block: x + conv2(lrelu(conv1(x))).
template <typename S>
struct ResBlock {
  Conv<S> c1, c2;

  static ResBlock make(int64_t c, Rng& rng) {
    ResBlock b;
    b.c1 = Conv<S>::make(c, c, 3, rng);
    b.c2 = Conv<S>::make(c, c, 3, rng);
    return b;
  }

  Tensor<S> operator()(const Tensor<S>& x) const { return add(x, c2(leaky_relu(c1(x)))); }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    c1.visit(p + ".c1", f);
    c2.visit(p + ".c2", f);
  }
};

template <typename S>
struct LinearLayer {
  Tensor<S> w, b;  // {M,N},{M}

  static LinearLayer make(int64_t m, int64_t n, Rng& rng, bool zero_init = false) {
    LinearLayer l;
    l.w = Tensor<S>::zeros({m, n}, true);
    l.b = Tensor<S>::zeros({m}, true);
    if (!zero_init) kaiming_fill(l.w, n, rng);
    return l;
  }

  Tensor<S> operator()(const Tensor<S>& x) const { return linear(x, w, b); }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".w", w);
    f(p + ".b", b);
  }
};

// Named references to every parameter of a module tree.
template <typename S>
struct ParamList {
  std::vector<std::string> names;
  std::vector<Tensor<S>*> tensors;

  void operator()(const std::string& name, Tensor<S>& t) {
    names.push_back(name);
    tensors.push_back(&t);
  }

  int64_t total_count() const {
    int64_t n = 0;
    for (auto* t : tensors) n += t->numel();
    return n;
  }
};

}  // namespace stinet
