#pragma once

#include <memory>
#include <vector>

#include "stinet/module.hpp"

namespace stinet {

// Fixed feature extractor phi for the perceptual loss. Deterministic and
// never updated during training.
template <typename S>
class PerceptualExtractor {
 public:
  virtual ~PerceptualExtractor() = default;
  virtual std::vector<Tensor<S>> features(const Tensor<S>& img) const = 0;
};

// phi = identity; makes the perceptual loss coincide with the
// reconstruction loss (useful as a test oracle and as a no-op stand-in).
template <typename S>
class IdentityExtractor : public PerceptualExtractor<S> {
 public:
  std::vector<Tensor<S>> features(const Tensor<S>& img) const override { return {img}; }
};

// Desk-scale default: a fixed, seeded 4-layer convolutional stack (two
// strided stages then two plain ones). Weights are frozen constants. An
// adapter can overwrite them from an externally supplied weight blob.
template <typename S>
class ConvExtractor : public PerceptualExtractor<S> {
 public:
  explicit ConvExtractor(uint64_t seed = 77, int64_t width = 16,
                         std::vector<int> taps = {1, 3}) // 0-based layer indices
      : taps_(std::move(taps)) {
    Rng rng(seed);
    layers_.push_back(Conv<S>::make(width, 3, 3, rng, false, 2));
    layers_.push_back(Conv<S>::make(width, width, 3, rng, false, 2));
    layers_.push_back(Conv<S>::make(width, width, 3, rng));
    layers_.push_back(Conv<S>::make(width, width, 3, rng));
    freeze();
  }

  std::vector<Tensor<S>> features(const Tensor<S>& img) const override {
    std::vector<Tensor<S>> out;
    auto x = img;
    for (size_t i = 0; i < layers_.size(); ++i) {
      x = leaky_relu(layers_[i](x));
      for (int t : taps_)
        if (size_t(t) == i) out.push_back(x);
    }
    STINET_CHECK(!out.empty(), "perceptual extractor: no taps selected");
    return out;
  }

  // Adapter for loading pretrained weights (flat blob in visit order).
  void load_weights(const std::vector<S>& blob) {
    size_t off = 0;
    for (auto& layer : layers_) {
      for (Tensor<S>* t : {&layer.w, &layer.b}) {
        STINET_CHECK(off + size_t(t->numel()) <= blob.size(),
                     "perceptual extractor: weight blob too small");
        std::copy(blob.begin() + off, blob.begin() + off + size_t(t->numel()),
                  t->values().begin());
        off += size_t(t->numel());
      }
    }
  }

 private:
  void freeze() {
    for (auto& layer : layers_) {
      layer.w.set_requires_grad(false);
      layer.b.set_requires_grad(false);
    }
  }

  std::vector<Conv<S>> layers_;
  std::vector<int> taps_;
};

}  // namespace stinet
