#include <gtest/gtest.h>

#include "stinet/optim.hpp"
#include "stinet/stlr.hpp"
#include "testutil.hpp"

using namespace stinet;
using testutil::expect_gradients_match;
using testutil::random_tensor;

namespace {

template <typename S>
std::vector<Tensor<S>> feature_seq(int64_t n, int64_t c, int64_t h, int64_t w, Rng& rng) {
  std::vector<Tensor<S>> seq;
  for (int64_t i = 0; i < n; ++i) seq.push_back(random_tensor<S>({c, h, w}, rng));
  return seq;
}

}  // namespace

TEST(OffsetPredictor, ShapeAndZeroInit) {
  Rng rng(1);
  OffsetPredictor<float> pred(64, rng);
  auto fa = random_tensor<float>({64, 32, 32}, rng);
  auto fb = random_tensor<float>({64, 32, 32}, rng);
  auto off = pred(fa, fb, OffsetDirection::PrevToT, ResLevel::LR);
  EXPECT_EQ(off.values.shape(), (std::vector<int64_t>{18, 32, 32}));
  // zero-initialized output layer: offsets are zero at initialization
  for (float v : off.values.values()) EXPECT_EQ(v, 0.f);
  EXPECT_THROW(pred(fa, random_tensor<float>({64, 16, 16}, rng), OffsetDirection::PrevToT,
                    ResLevel::LR),
               std::invalid_argument);
}

TEST(Inet, ShapesPreservedAndIdentityAtInit) {
  Rng rng(2);
  Inet<float> inet(rng);
  auto s_lr = OffsetField<float>{random_tensor<float>({18, 8, 8}, rng),
                                 OffsetDirection::PrevToT, ResLevel::LR};
  auto s_hr = OffsetField<float>{random_tensor<float>({18, 32, 32}, rng),
                                 OffsetDirection::PrevToT, ResLevel::HR};
  auto [lr_ref, hr_ref] = inet(s_lr, s_hr);
  EXPECT_EQ(lr_ref.values.shape(), s_lr.values.shape());
  EXPECT_EQ(hr_ref.values.shape(), s_hr.values.shape());
  // zero-initialized output heads: refined offsets equal the inputs
  for (int64_t i = 0; i < s_lr.values.numel(); ++i)
    EXPECT_EQ(lr_ref.values.data()[i], s_lr.values.data()[i]);
  for (int64_t i = 0; i < s_hr.values.numel(); ++i)
    EXPECT_EQ(hr_ref.values.data()[i], s_hr.values.data()[i]);
  // direction mismatch rejected
  auto s_bad = OffsetField<float>{s_hr.values, OffsetDirection::NextToT, ResLevel::HR};
  EXPECT_THROW(inet(s_lr, s_bad), std::invalid_argument);
}

TEST(Stlr, InetBypassAblation) {
  Rng rng(3);
  StlrModule<double> with_inet(4, true, OffsetsMode::Both, rng);
  StlrModule<double> no_inet = with_inet;
  no_inet.inet_enabled = false;
  // make the Inet heads nonzero so bypassing is observable
  for (auto& v : with_inet.inet.head_hr.w.values()) v = 0.05;
  auto lp = random_tensor<double>({4, 6, 6}, rng);
  auto lc = random_tensor<double>({4, 6, 6}, rng);
  auto hp = random_tensor<double>({4, 24, 24}, rng);
  auto hc = random_tensor<double>({4, 24, 24}, rng);
  // enable nonzero offsets by perturbing the predictor output layer
  for (auto& v : with_inet.p_lr_prev.c2.w.values()) v = 0.02;
  no_inet.p_lr_prev.c2.w = with_inet.p_lr_prev.c2.w;
  auto [a_l, a_h] = with_inet.direction_offsets(lp, lc, hp, hc, OffsetDirection::PrevToT);
  auto [b_l, b_h] = no_inet.direction_offsets(lp, lc, hp, hc, OffsetDirection::PrevToT);
  double diff = 0;
  for (int64_t i = 0; i < a_h.values.numel(); ++i)
    diff += std::abs(a_h.values.data()[i] - b_h.values.data()[i]);
  EXPECT_GT(diff, 1e-9);  // interaction changes the offsets
  // bypassed offsets are exactly the raw predictions
  auto raw = no_inet.p_hr_prev(hp, hc, OffsetDirection::PrevToT, ResLevel::HR);
  for (int64_t i = 0; i < raw.values.numel(); ++i)
    EXPECT_EQ(b_h.values.data()[i], raw.values.data()[i]);
}

TEST(Stlr, WindowShapeContract) {
  Rng rng(4);
  StlrModule<float> stlr(16, true, OffsetsMode::Both, rng);
  auto L = feature_seq<float>(3, 16, 8, 8, rng);
  auto H = feature_seq<float>(3, 16, 32, 32, rng);
  auto [l, h] = stlr.refine_window(L[0], L[1], L[2], H[0], H[1], H[2]);
  EXPECT_EQ(l.shape(), (std::vector<int64_t>{16, 8, 8}));
  EXPECT_EQ(h.shape(), (std::vector<int64_t>{16, 32, 32}));
}

TEST(Stlr, IdentityAtInitialization) {
  // zero-init offset heads + zero-init fusion output + residual form:
  // the refined feature equals the center feature exactly at init
  Rng rng(5);
  StlrModule<double> stlr(4, true, OffsetsMode::Both, rng);
  auto L = feature_seq<double>(3, 4, 6, 6, rng);
  auto H = feature_seq<double>(3, 4, 24, 24, rng);
  auto [l, h] = stlr.refine_window(L[0], L[1], L[2], H[0], H[1], H[2]);
  for (int64_t i = 0; i < l.numel(); ++i) EXPECT_DOUBLE_EQ(l.data()[i], L[1].data()[i]);
  for (int64_t i = 0; i < h.numel(); ++i) EXPECT_DOUBLE_EQ(h.data()[i], H[1].data()[i]);
}

TEST(Stlr, OffsetsModeVariants) {
  Rng rng(6);
  StlrModule<float> lr_only(8, true, OffsetsMode::LrOnly, rng);
  Rng rng2(6);
  StlrModule<float> hr_only(8, true, OffsetsMode::HrOnly, rng2);
  auto lp = random_tensor<float>({8, 4, 4}, rng);
  auto lc = random_tensor<float>({8, 4, 4}, rng);
  auto hp = random_tensor<float>({8, 16, 16}, rng);
  auto hc = random_tensor<float>({8, 16, 16}, rng);
  // LR-only: the HR offsets are the upsampled LR offsets (x4 displacement)
  for (auto& v : lr_only.p_lr_prev.c2.b.values()) v = 0.25f;
  auto [sl, sh] = lr_only.direction_offsets(lp, lc, hp, hc, OffsetDirection::PrevToT);
  EXPECT_EQ(sh.values.shape(), (std::vector<int64_t>{18, 16, 16}));
  for (int64_t i = 0; i < sh.values.numel(); ++i)
    EXPECT_NEAR(sh.values.data()[i], 1.0f, 1e-5);  // 0.25 * 4
  // HR-only: LR offsets are downsampled with displacements scaled by 1/4
  for (auto& v : hr_only.p_hr_prev.c2.b.values()) v = 0.8f;
  auto [sl2, sh2] = hr_only.direction_offsets(lp, lc, hp, hc, OffsetDirection::PrevToT);
  EXPECT_EQ(sl2.values.shape(), (std::vector<int64_t>{18, 4, 4}));
  for (int64_t i = 0; i < sl2.values.numel(); ++i)
    EXPECT_NEAR(sl2.values.data()[i], 0.2f, 1e-5);  // 0.8 / 4
}

TEST(Stlr, SequenceBoundaryRule) {
  Rng rng(7);
  StlrModule<float> stlr(8, true, OffsetsMode::Both, rng);
  // make the module non-trivial so window composition is observable
  for (auto& v : stlr.fuse_lr[3].w.values()) v = 0.01f;
  for (auto& v : stlr.fuse_hr[3].w.values()) v = 0.01f;
  auto L = feature_seq<float>(7, 8, 4, 4, rng);
  auto H = feature_seq<float>(7, 8, 16, 16, rng);
  auto [lr_seq, hr_seq] = stlr.refine_sequence(L, H);
  ASSERT_EQ(lr_seq.size(), 7u);
  // position 0 uses the window (f0, f0, f1)
  auto [l0, h0] = stlr.refine_window(L[0], L[0], L[1], H[0], H[0], H[1]);
  for (int64_t i = 0; i < l0.numel(); ++i) EXPECT_EQ(lr_seq[0].data()[i], l0.data()[i]);
  // last position uses (f5, f6, f6)
  auto [l6, h6] = stlr.refine_window(L[5], L[6], L[6], H[5], H[6], H[6]);
  for (int64_t i = 0; i < l6.numel(); ++i) EXPECT_EQ(lr_seq[6].data()[i], l6.data()[i]);
}

TEST(Stlr, SingleFrameSequenceUsesSelfWindow) {
  Rng rng(8);
  StlrModule<float> stlr(8, true, OffsetsMode::Both, rng);
  auto L = feature_seq<float>(1, 8, 4, 4, rng);
  auto H = feature_seq<float>(1, 8, 16, 16, rng);
  auto [lr_seq, hr_seq] = stlr.refine_sequence(L, H);
  ASSERT_EQ(lr_seq.size(), 1u);
  EXPECT_EQ(lr_seq[0].shape(), L[0].shape());
  EXPECT_THROW(stlr.refine_sequence({}, {}), std::invalid_argument);
}

TEST(Stlr, EndToEndGradientsFinite) {
  Rng rng(9);
  StlrModule<double> stlr(4, true, OffsetsMode::Both, rng);
  // non-degenerate offsets/fusion so every path carries gradient; fractional
  // offset biases keep sampling positions away from bilinear kinks
  for (auto& v : stlr.p_lr_prev.c2.w.values()) v = 0.02;
  for (auto& v : stlr.p_hr_next.c2.w.values()) v = 0.02;
  for (auto* pred : {&stlr.p_lr_prev, &stlr.p_lr_next, &stlr.p_hr_prev, &stlr.p_hr_next})
    for (auto& v : pred->c2.b.values()) v = 0.37;
  for (auto& v : stlr.fuse_lr[3].w.values()) v = 0.05;
  for (auto& v : stlr.fuse_hr[3].w.values()) v = 0.05;
  Rng drng(10);
  auto lp = random_tensor<double>({4, 4, 4}, drng, -1, 1, true);
  auto lc = random_tensor<double>({4, 4, 4}, drng, -1, 1);
  auto ln = random_tensor<double>({4, 4, 4}, drng, -1, 1);
  auto hp = random_tensor<double>({4, 16, 16}, drng, -1, 1);
  auto hc = random_tensor<double>({4, 16, 16}, drng, -1, 1);
  auto hn = random_tensor<double>({4, 16, 16}, drng, -1, 1);
  expect_gradients_match(
      [&] {
        auto [l, h] = stlr.refine_window(lp, lc, ln, hp, hc, hn);
        return add(mean(l), mean(h));
      },
      {lp}, 2e-4, 12);
}

TEST(Stlr, StaticSceneStaysNearCenterAfterShortTraining) {
  // toy training on a static scene: the refined feature should stay close
  // to the center feature (the module starts at identity and the target
  // keeps it there)
  Rng rng(11);
  StlrModule<float> stlr(4, true, OffsetsMode::Both, rng);
  auto f_l = random_tensor<float>({4, 6, 6}, rng, 0.5, 1.5);
  auto f_h = random_tensor<float>({4, 24, 24}, rng, 0.5, 1.5);
  ParamList<float> ps;
  stlr.visit("stlr", ps);
  std::vector<Tensor<float>> tensors;
  for (auto* t : ps.tensors) tensors.push_back(*t);
  Adam<float> opt(tensors);
  for (int it = 0; it < 30; ++it) {
    opt.zero_grad();
    auto [l, h] = stlr.refine_window(f_l, f_l, f_l, f_h, f_h, f_h);
    auto loss = add(mse_mean(l, f_l.detach()), mse_mean(h, f_h.detach()));
    loss.backward();
    opt.step(1e-3);
  }
  auto [l, h] = stlr.refine_window(f_l, f_l, f_l, f_h, f_h, f_h);
  double rel = 0, norm = 0;
  for (int64_t i = 0; i < l.numel(); ++i) {
    rel += std::abs(l.data()[i] - f_l.data()[i]);
    norm += std::abs(f_l.data()[i]);
  }
  EXPECT_LT(rel / norm, 0.10);  // within 10% of the center feature
}
