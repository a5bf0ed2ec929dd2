#pragma once

#include <utility>
#include <vector>

#include "stinet/module.hpp"

namespace stinet {

enum class OffsetDirection { PrevToT, NextToT };
enum class OffsetsMode { Both, LrOnly, HrOnly };

// Deformable sampling offsets for one alignment direction at one
// resolution: {2K,h,w} with K = 9 (3x3 kernel).
template <typename S>
struct OffsetField {
  Tensor<S> values;
  OffsetDirection direction = OffsetDirection::PrevToT;
  ResLevel level = ResLevel::LR;
};

// Two convolutional layers predicting offsets from concat(neighbor, center).
// The output layer is zero-initialized so alignment starts identity-like.
template <typename S>
struct OffsetPredictor {
  Conv<S> c1, c2;

  OffsetPredictor() = default;
  OffsetPredictor(int64_t c, Rng& rng) {
    c1 = Conv<S>::make(c, 2 * c, 3, rng);
    c2 = Conv<S>::make(18, c, 3, rng, /*zero_init=*/true);
  }

  OffsetField<S> operator()(const Tensor<S>& f_neighbor, const Tensor<S>& f_center,
                            OffsetDirection dir, ResLevel level) const {
    STINET_CHECK(f_neighbor.shape() == f_center.shape(),
                 "predict_offsets: mixed-resolution input rejected");
    return {c2(leaky_relu(c1(concat_ch<S>({f_neighbor, f_center})))), dir, level};
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    c1.visit(p + ".c1", f);
    c2.visit(p + ".c2", f);
  }
};

// Shareable interaction subnet. The LR offsets are upsampled to HR (with the
// displacement values rescaled by 4), concatenated with the HR offsets, and
// one convolution produces the interaction map; each refined field is the
// input plus a zero-initialized head of concat(interaction, input), so at
// initialization the refinement is exactly the identity.
template <typename S>
struct Inet {
  Conv<S> inter, head_hr, head_lr;

  Inet() = default;
  explicit Inet(Rng& rng) {
    inter = Conv<S>::make(18, 36, 3, rng);
    head_hr = Conv<S>::make(18, 36, 3, rng, /*zero_init=*/true);
    head_lr = Conv<S>::make(18, 36, 3, rng, /*zero_init=*/true);
  }

  std::pair<OffsetField<S>, OffsetField<S>> operator()(const OffsetField<S>& s_lr,
                                                       const OffsetField<S>& s_hr) const {
    STINET_CHECK(s_lr.direction == s_hr.direction, "inet_interact: direction mismatch");
    STINET_CHECK(s_lr.level == ResLevel::LR && s_hr.level == ResLevel::HR,
                 "inet_interact: expected one LR and one HR field");
    const int64_t hh = s_hr.values.dim(1), hw = s_hr.values.dim(2);
    const int64_t lh = s_lr.values.dim(1), lw = s_lr.values.dim(2);
    auto up = scale(resize_bilinear(s_lr.values, hh, hw), S(4));
    auto imap = leaky_relu(inter(concat_ch<S>({up, s_hr.values})));
    auto hr_ref = add(s_hr.values, head_hr(concat_ch<S>({imap, s_hr.values})));
    auto imap_lr = scale(resize_bilinear(imap, lh, lw), S(0.25));
    auto lr_ref = add(s_lr.values, head_lr(concat_ch<S>({imap_lr, s_lr.values})));
    return {OffsetField<S>{lr_ref, s_lr.direction, ResLevel::LR},
            OffsetField<S>{hr_ref, s_hr.direction, ResLevel::HR}};
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    inter.visit(p + ".inter", f);
    head_hr.visit(p + ".head_hr", f);
    head_lr.visit(p + ".head_lr", f);
  }
};

// Deformable 3x3 alignment of a neighbor feature toward the window center.
template <typename S>
Tensor<S> deformable_align(const Tensor<S>& f_neighbor, const OffsetField<S>& offsets,
                           const Tensor<S>& w, const Tensor<S>& b) {
  STINET_CHECK(f_neighbor.dim(1) == offsets.values.dim(1) &&
                   f_neighbor.dim(2) == offsets.values.dim(2),
               "deformable_align: offset resolution mismatch");
  return deform_conv3x3(f_neighbor, offsets.values, w, b);
}

// ST-LR: per-frame local refinement from the (prev, center, next) window at
// both resolution levels, with cross-resolution offset interaction.
template <typename S>
struct StlrModule {
  int64_t c = 0;
  bool inet_enabled = true;
  OffsetsMode mode = OffsetsMode::Both;

  OffsetPredictor<S> p_lr_prev, p_lr_next, p_hr_prev, p_hr_next;
  Inet<S> inet;
  // deformable conv weights per (level, direction)
  Tensor<S> dw_lr_prev, db_lr_prev, dw_lr_next, db_lr_next;
  Tensor<S> dw_hr_prev, db_hr_prev, dw_hr_next, db_hr_next;
  // four fusion convolutions per level; the last is zero-initialized and the
  // stack is residual on the center feature
  std::vector<Conv<S>> fuse_lr, fuse_hr;

  StlrModule() = default;
  StlrModule(int64_t c_, bool inet_on, OffsetsMode m, Rng& rng)
      : c(c_), inet_enabled(inet_on), mode(m) {
    p_lr_prev = OffsetPredictor<S>(c, rng);
    p_lr_next = OffsetPredictor<S>(c, rng);
    p_hr_prev = OffsetPredictor<S>(c, rng);
    p_hr_next = OffsetPredictor<S>(c, rng);
    inet = Inet<S>(rng);
    auto make_dcn = [&](Tensor<S>& w, Tensor<S>& b) {
      w = Tensor<S>::zeros({c, c, 3, 3}, true);
      kaiming_fill(w, c * 9, rng);
      b = Tensor<S>::zeros({c}, true);
    };
    make_dcn(dw_lr_prev, db_lr_prev);
    make_dcn(dw_lr_next, db_lr_next);
    make_dcn(dw_hr_prev, db_hr_prev);
    make_dcn(dw_hr_next, db_hr_next);
    auto make_fuse = [&](std::vector<Conv<S>>& fs) {
      fs.push_back(Conv<S>::make(c, 3 * c, 3, rng));
      fs.push_back(Conv<S>::make(c, c, 3, rng));
      fs.push_back(Conv<S>::make(c, c, 3, rng));
      fs.push_back(Conv<S>::make(c, c, 3, rng, /*zero_init=*/true));
    };
    make_fuse(fuse_lr);
    make_fuse(fuse_hr);
  }

  // Offset pair for one direction, honoring the offsets mode and Inet flag.
  std::pair<OffsetField<S>, OffsetField<S>> direction_offsets(
      const Tensor<S>& lp, const Tensor<S>& lc, const Tensor<S>& hp, const Tensor<S>& hc,
      OffsetDirection dir) const {
    const auto& pl = dir == OffsetDirection::PrevToT ? p_lr_prev : p_lr_next;
    const auto& ph = dir == OffsetDirection::PrevToT ? p_hr_prev : p_hr_next;
    switch (mode) {
      case OffsetsMode::LrOnly: {
        auto s_l = pl(lp, lc, dir, ResLevel::LR);
        auto up = scale(resize_bilinear(s_l.values, hc.dim(1), hc.dim(2)), S(4));
        return {s_l, OffsetField<S>{up, dir, ResLevel::HR}};
      }
      case OffsetsMode::HrOnly: {
        auto s_h = ph(hp, hc, dir, ResLevel::HR);
        auto down = scale(resize_bilinear(s_h.values, lc.dim(1), lc.dim(2)), S(0.25));
        return {OffsetField<S>{down, dir, ResLevel::LR}, s_h};
      }
      case OffsetsMode::Both:
      default: {
        auto s_l = pl(lp, lc, dir, ResLevel::LR);
        auto s_h = ph(hp, hc, dir, ResLevel::HR);
        if (inet_enabled) return inet(s_l, s_h);
        return {s_l, s_h};
      }
    }
  }

  Tensor<S> fuse(const std::vector<Conv<S>>& fs, const Tensor<S>& center,
                 const Tensor<S>& a_prev, const Tensor<S>& a_next) const {
    auto x = leaky_relu(fs[0](concat_ch<S>({center, a_prev, a_next})));
    x = leaky_relu(fs[1](x));
    x = leaky_relu(fs[2](x));
    return add(center, fs[3](x));
  }

  // Full window: 4 predicted offset fields, Inet per direction pair,
  // deformable alignment of the 4 neighbors, per-level fusion stacks.
  std::pair<Tensor<S>, Tensor<S>> refine_window(const Tensor<S>& lp, const Tensor<S>& lc,
                                                const Tensor<S>& ln, const Tensor<S>& hp,
                                                const Tensor<S>& hc, const Tensor<S>& hn) const {
    auto [sp_l, sp_h] = direction_offsets(lp, lc, hp, hc, OffsetDirection::PrevToT);
    auto [sn_l, sn_h] = direction_offsets(ln, lc, hn, hc, OffsetDirection::NextToT);
    auto a_lp = deformable_align(lp, sp_l, dw_lr_prev, db_lr_prev);
    auto a_ln = deformable_align(ln, sn_l, dw_lr_next, db_lr_next);
    auto a_hp = deformable_align(hp, sp_h, dw_hr_prev, db_hr_prev);
    auto a_hn = deformable_align(hn, sn_h, dw_hr_next, db_hr_next);
    return {fuse(fuse_lr, lc, a_lp, a_ln), fuse(fuse_hr, hc, a_hp, a_hn)};
  }

  // Single-level window used by the w/o-HR / w/o-LR model variants.
  Tensor<S> refine_window_single(ResLevel level, const Tensor<S>& fp, const Tensor<S>& fc,
                                 const Tensor<S>& fn) const {
    const bool lr = level == ResLevel::LR;
    auto sp = (lr ? p_lr_prev : p_hr_prev)(fp, fc, OffsetDirection::PrevToT, level);
    auto sn = (lr ? p_lr_next : p_hr_next)(fn, fc, OffsetDirection::NextToT, level);
    auto a_p = deformable_align(fp, sp, lr ? dw_lr_prev : dw_hr_prev, lr ? db_lr_prev : db_hr_prev);
    auto a_n = deformable_align(fn, sn, lr ? dw_lr_next : dw_hr_next, lr ? db_lr_next : db_hr_next);
    return fuse(lr ? fuse_lr : fuse_hr, fc, a_p, a_n);
  }

  // Sliding window of size 3 over the sequence; boundary frames use
  // themselves as the missing neighbor. One parameter set for every
  // position.
  std::pair<std::vector<Tensor<S>>, std::vector<Tensor<S>>> refine_sequence(
      const std::vector<Tensor<S>>& L, const std::vector<Tensor<S>>& H) const {
    STINET_CHECK(!L.empty() && L.size() == H.size(), "local_refine_sequence: bad sequence");
    const int64_t n = int64_t(L.size());
    std::vector<Tensor<S>> lr_out, hr_out;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t ip = std::max<int64_t>(i - 1, 0);
      const int64_t in_ = std::min<int64_t>(i + 1, n - 1);
      auto [l, h] = refine_window(L[ip], L[i], L[in_], H[ip], H[i], H[in_]);
      lr_out.push_back(l);
      hr_out.push_back(h);
    }
    return {lr_out, hr_out};
  }

  std::vector<Tensor<S>> refine_sequence_single(ResLevel level,
                                                const std::vector<Tensor<S>>& seq) const {
    STINET_CHECK(!seq.empty(), "local_refine_sequence: empty sequence");
    const int64_t n = int64_t(seq.size());
    std::vector<Tensor<S>> out;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t ip = std::max<int64_t>(i - 1, 0);
      const int64_t in_ = std::min<int64_t>(i + 1, n - 1);
      out.push_back(refine_window_single(level, seq[ip], seq[i], seq[in_]));
    }
    return out;
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    p_lr_prev.visit(p + ".p_lr_prev", f);
    p_lr_next.visit(p + ".p_lr_next", f);
    p_hr_prev.visit(p + ".p_hr_prev", f);
    p_hr_next.visit(p + ".p_hr_next", f);
    inet.visit(p + ".inet", f);
    f(p + ".dw_lr_prev", dw_lr_prev);
    f(p + ".db_lr_prev", db_lr_prev);
    f(p + ".dw_lr_next", dw_lr_next);
    f(p + ".db_lr_next", db_lr_next);
    f(p + ".dw_hr_prev", dw_hr_prev);
    f(p + ".db_hr_prev", db_hr_prev);
    f(p + ".dw_hr_next", dw_hr_next);
    f(p + ".db_hr_next", db_hr_next);
    for (size_t i = 0; i < fuse_lr.size(); ++i) fuse_lr[i].visit(p + ".fl" + std::to_string(i), f);
    for (size_t i = 0; i < fuse_hr.size(); ++i) fuse_hr[i].visit(p + ".fh" + std::to_string(i), f);
  }
};

}  // namespace stinet
