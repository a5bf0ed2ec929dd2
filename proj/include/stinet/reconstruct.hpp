#pragma once

#include <vector>

#include "stinet/module.hpp"

namespace stinet {

// Final fusion heads: V^L_t = 1x1-conv(pixel_shuffle^2(L^G_t)),
// V^H_t = 1x1-conv(H^G_t), V_t = V^L_t + V^H_t. Two 2x shuffles require the
// channel count to be divisible by 16. Outputs stay unclamped; clamping to
// [0,1] happens only at export.
template <typename S>
struct ReconHeads {
  int64_t c = 0;
  Conv<S> head_lr;  // {3, c/16, 1, 1}
  Conv<S> head_hr;  // {3, c, 1, 1}

  ReconHeads() = default;
  ReconHeads(int64_t c_, Rng& rng) : c(c_) {
    STINET_CHECK(c % 16 == 0, "reconstruct: channels must be divisible by 16 for two 2x shuffles");
    head_lr = Conv<S>::make(3, c / 16, 1, rng);
    head_hr = Conv<S>::make(3, c, 1, rng);
  }

  Tensor<S> lr_path(const Tensor<S>& lg) const {
    return head_lr(pixel_shuffle(pixel_shuffle(lg, 2), 2));
  }
  Tensor<S> hr_path(const Tensor<S>& hg) const { return head_hr(hg); }

  Tensor<S> operator()(const Tensor<S>& lg, const Tensor<S>& hg) const {
    return add(lr_path(lg), hr_path(hg));
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    head_lr.visit(p + ".lr", f);
    head_hr.visit(p + ".hr", f);
  }
};

template <typename S>
std::vector<Tensor<S>> reconstruct(const ReconHeads<S>& heads, const std::vector<Tensor<S>>& lg,
                                   const std::vector<Tensor<S>>& hg) {
  STINET_CHECK(lg.size() == hg.size(), "reconstruct: sequence length mismatch");
  std::vector<Tensor<S>> frames;
  for (size_t t = 0; t < lg.size(); ++t) frames.push_back(heads(lg[t], hg[t]));
  return frames;
}

}  // namespace stinet
