#include <gtest/gtest.h>

#include "stinet/config.hpp"
#include "stinet/losses.hpp"
#include "testutil.hpp"

using namespace stinet;
using testutil::expect_gradients_match;
using testutil::random_tensor;

using T = Tensor<double>;

namespace {

std::vector<T> const_frames(int n, int64_t c, int64_t hw, double v) {
  std::vector<T> out;
  for (int i = 0; i < n; ++i) out.push_back(T::full({c, hw, hw}, v));
  return out;
}

}  // namespace

TEST(LossRec, ClosedFormCases) {
  auto a = const_frames(3, 3, 4, 0.6);
  auto b = const_frames(3, 3, 4, 0.5);
  EXPECT_NEAR(loss_rec(a, b).item(), 0.01, 1e-12);  // uniform difference 0.1
  EXPECT_DOUBLE_EQ(loss_rec(a, a).item(), 0.0);
  auto short_seq = const_frames(2, 3, 4, 0.5);
  EXPECT_THROW(loss_rec(a, short_seq), std::invalid_argument);
}

TEST(LossRec, AnalyticGradient) {
  Rng rng(1);
  std::vector<T> pred = {random_tensor<double>({2, 3, 3}, rng, 0, 1, true)};
  std::vector<T> gt = {random_tensor<double>({2, 3, 3}, rng, 0, 1)};
  auto loss = loss_rec(pred, gt);
  loss.backward();
  // gradient = 2 (pred - gt) / count
  for (int64_t i = 0; i < pred[0].numel(); ++i)
    EXPECT_NEAR(pred[0].grad_view()[size_t(i)],
                2.0 * (pred[0].data()[i] - gt[0].data()[i]) / 18.0, 1e-12);
  expect_gradients_match([&] { return loss_rec(pred, gt); }, {pred[0]});
}

TEST(LossPerceptual, IdentityExtractorEqualsLossRec) {
  Rng rng(2);
  std::vector<T> pred = {random_tensor<double>({3, 6, 6}, rng, 0, 1)};
  std::vector<T> gt = {random_tensor<double>({3, 6, 6}, rng, 0, 1)};
  IdentityExtractor<double> id;
  EXPECT_DOUBLE_EQ(loss_perceptual(pred, gt, id).item(), loss_rec(pred, gt).item());
  EXPECT_DOUBLE_EQ(loss_perceptual(pred, pred, id).item(), 0.0);
}

TEST(LossPerceptual, MonotoneUnderLinearExtractorScaling) {
  // with a linear (identity) extractor, scaling the prediction error scales
  // the loss quadratically, hence monotonically
  Rng rng(3);
  auto gt_frame = random_tensor<double>({3, 6, 6}, rng, 0, 1);
  auto delta = random_tensor<double>({3, 6, 6}, rng, -0.2, 0.2);
  IdentityExtractor<double> id;
  double prev = 0;
  for (double k : {0.5, 1.0, 2.0, 3.0}) {
    std::vector<T> pred = {add(gt_frame, scale(delta, k))};
    const double v = loss_perceptual(pred, {gt_frame}, id).item();
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(LossPerceptual, ConvExtractorIsDeterministicAndFrozen) {
  Rng rng(4);
  ConvExtractor<double> phi(123);
  ConvExtractor<double> phi2(123);
  auto img = random_tensor<double>({3, 16, 16}, rng, 0, 1);
  auto f1 = phi.features(img);
  auto f2 = phi2.features(img);
  ASSERT_EQ(f1.size(), f2.size());
  for (size_t k = 0; k < f1.size(); ++k) EXPECT_EQ(f1[k].values(), f2[k].values());
  // frozen: no gradient flows into extractor weights
  auto x = random_tensor<double>({3, 16, 16}, rng, 0, 1, true);
  auto loss = loss_perceptual<double>({x}, {img}, phi);
  loss.backward();
  EXPECT_TRUE(x.has_grad());
}

TEST(LossAbs, PairCountsAndVariants) {
  const int n = 7;
  EXPECT_EQ(abs_pair_count(AbsMode::On, n), n * (n - 1));        // 42
  EXPECT_EQ(abs_pair_count(AbsMode::Adjacent, n), 2 * (n - 1));  // 12
  EXPECT_EQ(abs_pair_count(AbsMode::Off, n), 0);

  Rng rng(5);
  std::vector<T> pred = {random_tensor<double>({2, 4, 4}, rng)};
  std::vector<T> gt = {pred[0]};
  EXPECT_DOUBLE_EQ(loss_abs(pred, gt).item(), 0.0);  // identical flows
  std::vector<T> off = {add_scalar(pred[0], 0.5)};
  EXPECT_NEAR(loss_abs(pred, off, AbsNorm::L2).item(), 0.25, 1e-12);
  EXPECT_NEAR(loss_abs(pred, off, AbsNorm::L1).item(), 0.5, 1e-12);
}

TEST(LossRel, HandEvaluatedConstantCases) {
  // short +1, long +2 everywhere: motion accumulates, zero loss
  auto s1 = const_frames(1, 2, 4, 1.0);
  auto l2 = const_frames(1, 2, 4, 2.0);
  EXPECT_DOUBLE_EQ(loss_rel(s1, l2).item(), 0.0);
  // short +2, long +1: per-element contribution 1
  auto s2 = const_frames(1, 2, 4, 2.0);
  auto l1 = const_frames(1, 2, 4, 1.0);
  EXPECT_DOUBLE_EQ(loss_rel(s2, l1).item(), 1.0);
  // short -2, long -1: sign -1, (-2 - (-1)) = -1, product +1
  auto sm2 = const_frames(1, 2, 4, -2.0);
  auto lm1 = const_frames(1, 2, 4, -1.0);
  EXPECT_DOUBLE_EQ(loss_rel(sm2, lm1).item(), 1.0);
  // zero short flow contributes nothing (sgn(0) = 0)
  auto s0 = const_frames(1, 2, 4, 0.0);
  EXPECT_DOUBLE_EQ(loss_rel(s0, lm1).item(), 0.0);
}

TEST(LossRel, ZeroOnSameSignAccumulatingFamilies) {
  // property: elementwise same sign and |short| <= |long| implies zero loss
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    auto mag = random_tensor<double>({2, 5, 5}, rng, 0.0, 2.0);
    auto extra = random_tensor<double>({2, 5, 5}, rng, 0.0, 1.0);
    auto sgn = random_tensor<double>({2, 5, 5}, rng, -1.0, 1.0);
    auto s = T::zeros({2, 5, 5});
    auto l = T::zeros({2, 5, 5});
    for (int64_t i = 0; i < 50; ++i) {
      const double sg = sgn.data()[i] >= 0 ? 1.0 : -1.0;
      s.data()[i] = sg * mag.data()[i];
      l.data()[i] = sg * (mag.data()[i] + extra.data()[i]);
    }
    ASSERT_DOUBLE_EQ(loss_rel<double>({s}, {l}).item(), 0.0) << "trial " << trial;
  }
}

TEST(LossRel, StrongConstraintVariant) {
  Rng rng(7);
  auto s = random_tensor<double>({2, 4, 4}, rng);
  auto l = random_tensor<double>({2, 4, 4}, rng);
  // gt differences identical to predicted ones -> zero
  EXPECT_DOUBLE_EQ(loss_rel_strong<double>({s}, {l}, {s}, {l}).item(), 0.0);
  auto l_shift = add_scalar(l, 0.3);
  EXPECT_NEAR(loss_rel_strong<double>({s}, {l_shift}, {s}, {l}).item(), 0.09, 1e-12);
}

TEST(TotalLoss, ArithmeticAndReport) {
  auto one = T::scalar(1.0);
  LossReport rep;
  auto total = total_loss(one, one, one, one, one, 0.1, 0.1, &rep);
  EXPECT_NEAR(total.item(), 2.3, 1e-12);  // 1 + 1 + 0.1*1 + 0.1*(1+1)
  EXPECT_NEAR(rep.total, 2.3, 1e-12);
  EXPECT_NEAR(rep.total,
              rep.l_rec + rep.l_rec_phase1 + rep.lambda1 * rep.l_per +
                  rep.lambda2 * (rep.l_abs + rep.l_rel),
              1e-15);
  // degenerate weights: total = l_rec + l'_rec
  auto t0 = total_loss(one, one, one, one, one, 0.0, 0.0, &rep);
  EXPECT_DOUBLE_EQ(t0.item(), 2.0);
  // missing components count as zero
  auto t1 = total_loss(one, T(), T(), T(), T(), 0.1, 0.1, &rep);
  EXPECT_DOUBLE_EQ(t1.item(), 1.0);
}

TEST(TotalLoss, NonFiniteComponentAborts) {
  auto one = T::scalar(1.0);
  auto bad = T::scalar(std::numeric_limits<double>::quiet_NaN());
  EXPECT_THROW(total_loss(one, one, bad, one, one, 0.1, 0.1), std::invalid_argument);
  auto inf = T::scalar(std::numeric_limits<double>::infinity());
  EXPECT_THROW(total_loss(inf, one, one, one, one, 0.1, 0.1), std::invalid_argument);
}

TEST(TotalLoss, DefaultWeightsAreTenths) {
  LossConfig lc;
  EXPECT_DOUBLE_EQ(lc.lambda1, 0.1);
  EXPECT_DOUBLE_EQ(lc.lambda2, 0.1);
}
