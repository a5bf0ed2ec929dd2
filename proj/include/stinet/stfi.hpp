#pragma once

#include <utility>
#include <vector>

#include "stinet/module.hpp"

namespace stinet {

// Spatial super-resolution feature initialization: one LR feature stack and
// a x4 up-projection (two strided transposed-conv stages, one residual
// block per stage) producing the HR feature of a given frame.
template <typename S>
struct SsrModule {
  Conv<S> head;
  ResBlock<S> rb_lr;
  TConv<S> up1, up2;
  ResBlock<S> rb_h1, rb_h2;

  SsrModule() = default;
  SsrModule(int64_t c, Rng& rng) {
    head = Conv<S>::make(c, 3, 3, rng);
    rb_lr = ResBlock<S>::make(c, rng);
    up1 = TConv<S>::make(c, c, 4, rng);
    rb_h1 = ResBlock<S>::make(c, rng);
    up2 = TConv<S>::make(c, c, 4, rng);
    rb_h2 = ResBlock<S>::make(c, rng);
  }

  // frame: {3,h,w} -> L {c,h,w} and, when want_hr, H {c,4h,4w}.
  std::pair<Tensor<S>, Tensor<S>> operator()(const Tensor<S>& frame, bool want_hr = true) const {
    STINET_CHECK(frame.ndim() == 3 && frame.dim(0) == 3, "init_features: expected {3,h,w} frame");
    auto l = rb_lr(leaky_relu(head(frame)));
    if (!want_hr) return {l, Tensor<S>()};
    auto h = rb_h1(leaky_relu(up1(l)));
    h = rb_h2(leaky_relu(up2(h)));
    return {l, h};
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    head.visit(p + ".head", f);
    rb_lr.visit(p + ".rb_lr", f);
    up1.visit(p + ".up1", f);
    rb_h1.visit(p + ".rb_h1", f);
    up2.visit(p + ".up2", f);
    rb_h2.visit(p + ".rb_h2", f);
  }
};

// Mnet: two residual blocks and two convolutional layers mapping the pair
// of adapted flows to a c-channel motion representation at LR resolution.
template <typename S>
struct MotionSubnet {
  Conv<S> c_in, c_out;
  ResBlock<S> r1, r2;

  MotionSubnet() = default;
  MotionSubnet(int64_t c, Rng& rng) {
    c_in = Conv<S>::make(c, 4, 3, rng);
    r1 = ResBlock<S>::make(c, rng);
    r2 = ResBlock<S>::make(c, rng);
    c_out = Conv<S>::make(c, c, 3, rng);
  }

  Tensor<S> operator()(const Tensor<S>& o_to_prev, const Tensor<S>& o_to_next) const {
    STINET_CHECK(o_to_prev.shape() == o_to_next.shape(),
                 "motion_subnet: flow resolution mismatch");
    STINET_CHECK(o_to_prev.ndim() == 3 && o_to_prev.dim(0) == 2,
                 "motion_subnet: expected {2,h,w} flows");
    auto x = concat_ch<S>({o_to_prev, o_to_next});
    return c_out(r2(r1(leaky_relu(c_in(x)))));
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    c_in.visit(p + ".c_in", f);
    r1.visit(p + ".r1", f);
    r2.visit(p + ".r2", f);
    c_out.visit(p + ".c_out", f);
  }
};

// Pnet: the LR branch input is concat(M, L_prev, L_next) and the HR branch
// input concat(up4(M), H_prev, H_next); both 3c-channel stacks run through
// the SAME five residual blocks (one parameter set) unless sharing is
// disabled, then each branch's input is concatenated with the shared-block
// output and fused by a per-branch convolution down to c channels.
template <typename S>
struct InterpSubnet {
  int64_t c = 0;
  bool shared = true;
  std::vector<ResBlock<S>> blocks;     // at 3c channels
  std::vector<ResBlock<S>> blocks_hr;  // only populated when !shared
  Conv<S> fuse_lr, fuse_hr;

  InterpSubnet() = default;
  InterpSubnet(int64_t c_, int64_t num_blocks, bool shared_, Rng& rng) : c(c_), shared(shared_) {
    for (int64_t i = 0; i < num_blocks; ++i) blocks.push_back(ResBlock<S>::make(3 * c, rng));
    if (!shared)
      for (int64_t i = 0; i < num_blocks; ++i) blocks_hr.push_back(ResBlock<S>::make(3 * c, rng));
    fuse_lr = Conv<S>::make(c, 6 * c, 3, rng);
    fuse_hr = Conv<S>::make(c, 6 * c, 3, rng);
  }

  Tensor<S> run_branch(const Tensor<S>& input, const std::vector<ResBlock<S>>& stack,
                       const Conv<S>& fuse) const {
    auto x = input;
    for (const auto& b : stack) x = b(x);
    return fuse(concat_ch<S>({input, x}));
  }

  // Full two-branch interpolation.
  std::pair<Tensor<S>, Tensor<S>> operator()(const Tensor<S>& m, const Tensor<S>& l_prev,
                                             const Tensor<S>& l_next, const Tensor<S>& h_prev,
                                             const Tensor<S>& h_next) const {
    STINET_CHECK(l_prev.dim(0) == c && h_prev.dim(0) == c,
                 "interpolate_features: channel mismatch between branches");
    STINET_CHECK(h_prev.dim(1) == 4 * l_prev.dim(1) && h_prev.dim(2) == 4 * l_prev.dim(2),
                 "interpolate_features: HR must be 4x LR");
    auto lr_in = concat_ch<S>({m, l_prev, l_next});
    auto m_hr = resize_bilinear(m, h_prev.dim(1), h_prev.dim(2));
    auto hr_in = concat_ch<S>({m_hr, h_prev, h_next});
    auto l = run_branch(lr_in, blocks, fuse_lr);
    auto h = run_branch(hr_in, shared ? blocks : blocks_hr, fuse_hr);
    return {l, h};
  }

  // Single-branch variants for the w/o-HR / w/o-LR model ablations.
  Tensor<S> lr_only(const Tensor<S>& m, const Tensor<S>& l_prev, const Tensor<S>& l_next) const {
    return run_branch(concat_ch<S>({m, l_prev, l_next}), blocks, fuse_lr);
  }
  Tensor<S> hr_only(const Tensor<S>& m, const Tensor<S>& h_prev, const Tensor<S>& h_next) const {
    auto m_hr = resize_bilinear(m, h_prev.dim(1), h_prev.dim(2));
    return run_branch(concat_ch<S>({m_hr, h_prev, h_next}), blocks, fuse_hr);
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    for (size_t i = 0; i < blocks.size(); ++i) blocks[i].visit(p + ".b" + std::to_string(i), f);
    for (size_t i = 0; i < blocks_hr.size(); ++i)
      blocks_hr[i].visit(p + ".bh" + std::to_string(i), f);
    fuse_lr.visit(p + ".fuse_lr", f);
    fuse_hr.visit(p + ".fuse_hr", f);
  }
};

// Separated 1x1 projections used only by the Phase-1 reconstruction loss.
template <typename S>
struct Phase1Heads {
  Conv<S> lr_head, hr_head;

  Phase1Heads() = default;
  Phase1Heads(int64_t c, Rng& rng) {
    lr_head = Conv<S>::make(3, c, 1, rng);
    hr_head = Conv<S>::make(3, c, 1, rng);
  }

  std::pair<Tensor<S>, Tensor<S>> operator()(const Tensor<S>& l, const Tensor<S>& h) const {
    return {lr_head(l), hr_head(h)};
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    lr_head.visit(p + ".lr", f);
    hr_head.visit(p + ".hr", f);
  }
};

}  // namespace stinet
