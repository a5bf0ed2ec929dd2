#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "stinet/common.hpp"

namespace stinet {

// Reverse-mode autodiff on dense row-major tensors. Each op returns a fresh
// node whose closure knows how to push gradients into its parents; calling
// backward() on a scalar runs the tape in reverse topological order.
//
// The scalar type S is a template parameter: training runs in float, the
// finite-difference gradient suite instantiates everything in double.
template <typename S>
struct TensorImpl {
  std::vector<int64_t> shape;
  std::shared_ptr<std::vector<S>> value;
  std::vector<S> grad;  // sized lazily on first accumulation
  bool requires_grad = false;
  std::function<void()> backward;
  std::vector<std::shared_ptr<TensorImpl<S>>> parents;
};

template <typename S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl<S>> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false) {
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->shape = std::move(shape);
    impl->value = std::make_shared<std::vector<S>>(count(impl->shape), S(0));
    impl->requires_grad = requires_grad;
    return Tensor(impl);
  }

  static Tensor full(std::vector<int64_t> shape, S v, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& x : t.values()) x = v;
    return t;
  }

  static Tensor from(std::vector<int64_t> shape, std::vector<S> data, bool requires_grad = false) {
    STINET_CHECK(count(shape) == int64_t(data.size()), "tensor data size mismatch");
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->shape = std::move(shape);
    impl->value = std::make_shared<std::vector<S>>(std::move(data));
    impl->requires_grad = requires_grad;
    return Tensor(impl);
  }

  static Tensor scalar(S v, bool requires_grad = false) { return full({1}, v, requires_grad); }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int64_t>& shape() const { return impl_->shape; }
  int64_t dim(size_t i) const { return impl_->shape[i]; }
  size_t ndim() const { return impl_->shape.size(); }
  int64_t numel() const { return count(impl_->shape); }

  S* data() { return impl_->value->data(); }
  const S* data() const { return impl_->value->data(); }
  std::vector<S>& values() { return *impl_->value; }
  const std::vector<S>& values() const { return *impl_->value; }
  S item() const {
    STINET_CHECK(numel() == 1, "item() on non-scalar tensor");
    return (*impl_->value)[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }

  std::vector<S>& grad() { return ensure_grad(*impl_); }
  const std::vector<S>& grad_view() const { return impl_->grad; }
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
  }

  TensorImpl<S>* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl<S>>& handle() const { return impl_; }

  // Leaf view sharing the same storage but with its own grad buffer. Worker
  // threads shadow the master parameters so forward passes only read shared
  // data while gradient accumulation stays thread-private.
  Tensor shadow() const {
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->shape = impl_->shape;
    impl->value = impl_->value;
    impl->requires_grad = impl_->requires_grad;
    return Tensor(impl);
  }

  // Constant view: same data, detached from the tape.
  Tensor detach() const {
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->shape = impl_->shape;
    impl->value = impl_->value;
    impl->requires_grad = false;
    return Tensor(impl);
  }

  Tensor deep_copy() const {
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->shape = impl_->shape;
    impl->value = std::make_shared<std::vector<S>>(*impl_->value);
    impl->requires_grad = impl_->requires_grad;
    return Tensor(impl);
  }

  // Runs reverse-mode accumulation from this scalar.
  void backward() {
    STINET_CHECK(numel() == 1, "backward() requires a scalar root");
    std::vector<TensorImpl<S>*> topo;
    std::unordered_set<TensorImpl<S>*> seen;
    // Iterative post-order DFS: every node is appended after all its parents.
    std::vector<std::pair<TensorImpl<S>*, size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    seen.insert(impl_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        TensorImpl<S>* p = node->parents[next++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        topo.push_back(node);
        stack.pop_back();
      }
    }
    ensure_grad(*impl_)[0] = S(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      if ((*it)->backward) (*it)->backward();
    }
  }

  static int64_t count(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  static std::vector<S>& ensure_grad(TensorImpl<S>& impl) {
    if (impl.grad.empty()) impl.grad.assign(count(impl.shape), S(0));
    return impl.grad;
  }

 private:
  std::shared_ptr<TensorImpl<S>> impl_;
};

namespace detail {

// Builds the result node for an op. Parents that do not require grad are
// still recorded (they may be interior nodes), but if nothing requires grad
// the node is a plain constant with no tape entry.
template <typename S>
Tensor<S> make_node(std::vector<int64_t> shape, std::vector<Tensor<S>> parents,
                    std::function<void(TensorImpl<S>*)> backward) {
  auto impl = std::make_shared<TensorImpl<S>>();
  impl->shape = std::move(shape);
  impl->value = std::make_shared<std::vector<S>>(Tensor<S>::count(impl->shape), S(0));
  bool track = false;
  for (const auto& p : parents) track = track || p.requires_grad();
  impl->requires_grad = track;
  if (track) {
    for (auto& p : parents) impl->parents.push_back(p.handle());
    TensorImpl<S>* raw = impl.get();
    impl->backward = [raw, fn = std::move(backward)]() { fn(raw); };
  }
  return Tensor<S>(std::move(impl));
}

template <typename S>
bool same_shape(const Tensor<S>& a, const Tensor<S>& b) {
  return a.shape() == b.shape();
}

}  // namespace detail

// ---- elementwise arithmetic ----

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  STINET_CHECK(detail::same_shape(a, b), "add: shape mismatch");
  auto ai = a.handle();
  auto bi = b.handle();
  auto out = detail::make_node<S>(a.shape(), {a, b}, [ai, bi](TensorImpl<S>* o) {
    if (ai->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*ai);
      for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
    }
    if (bi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*bi);
      for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
    }
  });
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
  return out;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  STINET_CHECK(detail::same_shape(a, b), "sub: shape mismatch");
  auto ai = a.handle();
  auto bi = b.handle();
  auto out = detail::make_node<S>(a.shape(), {a, b}, [ai, bi](TensorImpl<S>* o) {
    if (ai->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*ai);
      for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
    }
    if (bi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*bi);
      for (size_t i = 0; i < g.size(); ++i) g[i] -= o->grad[i];
    }
  });
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] - pb[i];
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  STINET_CHECK(detail::same_shape(a, b), "mul: shape mismatch");
  auto ai = a.handle();
  auto bi = b.handle();
  auto out = detail::make_node<S>(a.shape(), {a, b}, [ai, bi](TensorImpl<S>* o) {
    if (ai->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*ai);
      const auto& vb = *bi->value;
      for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * vb[i];
    }
    if (bi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*bi);
      const auto& va = *ai->value;
      for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * va[i];
    }
  });
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
  return out;
}

template <typename S>
Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) {
  STINET_CHECK(detail::same_shape(a, b), "div: shape mismatch");
  auto ai = a.handle();
  auto bi = b.handle();
  auto out = detail::make_node<S>(a.shape(), {a, b}, [ai, bi](TensorImpl<S>* o) {
    const auto& va = *ai->value;
    const auto& vb = *bi->value;
    if (ai->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*ai);
      for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] / vb[i];
    }
    if (bi->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*bi);
      for (size_t i = 0; i < g.size(); ++i) g[i] -= o->grad[i] * va[i] / (vb[i] * vb[i]);
    }
  });
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] / pb[i];
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S k) {
  auto ai = a.handle();
  auto out = detail::make_node<S>(a.shape(), {a}, [ai, k](TensorImpl<S>* o) {
    if (!ai->requires_grad) return;
    auto& g = Tensor<S>::ensure_grad(*ai);
    for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * k;
  });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * k;
  return out;
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& a, S k) {
  auto ai = a.handle();
  auto out = detail::make_node<S>(a.shape(), {a}, [ai](TensorImpl<S>* o) {
    if (!ai->requires_grad) return;
    auto& g = Tensor<S>::ensure_grad(*ai);
    for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
  });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + k;
  return out;
}

// Multiplies every element of `a` by a scalar-shaped tensor (used for flow
// adaptation factors and graph edge weights).
template <typename S>
Tensor<S> smul(const Tensor<S>& a, const Tensor<S>& s) {
  STINET_CHECK(s.numel() == 1, "smul: scale must be scalar tensor");
  auto ai = a.handle();
  auto si = s.handle();
  auto out = detail::make_node<S>(a.shape(), {a, s}, [ai, si](TensorImpl<S>* o) {
    const S sv = (*si->value)[0];
    if (ai->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*ai);
      for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * sv;
    }
    if (si->requires_grad) {
      auto& g = Tensor<S>::ensure_grad(*si);
      const auto& va = *ai->value;
      S acc = 0;
      for (size_t i = 0; i < va.size(); ++i) acc += o->grad[i] * va[i];
      g[0] += acc;
    }
  });
  const S* pa = a.data();
  const S sv = s.item();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * sv;
  return out;
}

// ---- activations ----

template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& a, S slope = S(0.1)) {
  auto ai = a.handle();
  auto out = detail::make_node<S>(a.shape(), {a}, [ai, slope](TensorImpl<S>* o) {
    if (!ai->requires_grad) return;
    auto& g = Tensor<S>::ensure_grad(*ai);
    const auto& va = *ai->value;
    for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * (va[i] > S(0) ? S(1) : slope);
  });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] > S(0) ? pa[i] : slope * pa[i];
  return out;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
  return leaky_relu(a, S(0));
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  auto ai = a.handle();
  auto out = detail::make_node<S>(a.shape(), {a}, [ai](TensorImpl<S>* o) {
    if (!ai->requires_grad) return;
    auto& g = Tensor<S>::ensure_grad(*ai);
    const auto& va = *ai->value;
    for (size_t i = 0; i < g.size(); ++i) {
      S s = S(1) / (S(1) + std::exp(-va[i]));
      g[i] += o->grad[i] * s * (S(1) - s);
    }
  });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = S(1) / (S(1) + std::exp(-pa[i]));
  return out;
}

template <typename S>
Tensor<S> softplus(const Tensor<S>& a) {
  auto ai = a.handle();
  auto out = detail::make_node<S>(a.shape(), {a}, [ai](TensorImpl<S>* o) {
    if (!ai->requires_grad) return;
    auto& g = Tensor<S>::ensure_grad(*ai);
    const auto& va = *ai->value;
    for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] / (S(1) + std::exp(-va[i]));
  });
  const S* pa = a.data();
  S* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    // log(1+e^x), stable for both signs
    po[i] = pa[i] > S(0) ? pa[i] + std::log1p(std::exp(-pa[i])) : std::log1p(std::exp(pa[i]));
  }
  return out;
}

// ---- reductions ----

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  auto ai = a.handle();
  auto out = detail::make_node<S>({1}, {a}, [ai](TensorImpl<S>* o) {
    if (!ai->requires_grad) return;
    auto& g = Tensor<S>::ensure_grad(*ai);
    for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[0];
  });
  const S* pa = a.data();
  S acc = 0;
  for (int64_t i = 0; i < a.numel(); ++i) acc += pa[i];
  out.data()[0] = acc;
  return out;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a) {
  const S inv = S(1) / S(a.numel());
  auto ai = a.handle();
  auto out = detail::make_node<S>({1}, {a}, [ai, inv](TensorImpl<S>* o) {
    if (!ai->requires_grad) return;
    auto& g = Tensor<S>::ensure_grad(*ai);
    for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[0] * inv;
  });
  const S* pa = a.data();
  S acc = 0;
  for (int64_t i = 0; i < a.numel(); ++i) acc += pa[i];
  out.data()[0] = acc * inv;
  return out;
}

}  // namespace stinet
