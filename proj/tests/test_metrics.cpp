#include <gtest/gtest.h>

#include "stinet/metrics.hpp"
#include "testutil.hpp"

using namespace stinet;

TEST(Psnr, ClosedFormCases) {
  // single-channel images: luma is the identity
  Image a(1, 16, 16, 0.6f);
  Image b(1, 16, 16, 0.5f);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-5);  // MSE 0.01 -> 20 dB (float storage floor ~2e-6)
  Image c(1, 16, 16, 1.0f);
  Image d(1, 16, 16, 0.0f);
  EXPECT_NEAR(psnr(c, d), 0.0, 1e-12);  // uniform difference 1 -> 0 dB
  EXPECT_DOUBLE_EQ(psnr(a, a), 100.0);  // identical -> cap
  MetricOptions opt;
  opt.psnr_cap = 80;
  EXPECT_DOUBLE_EQ(psnr(a, a, opt), 80.0);
}

TEST(Psnr, RgbModeCoversAllChannels) {
  Image a(3, 8, 8, 0.5f), b(3, 8, 8, 0.5f);
  // perturb only the blue channel; luma weights blue weakly, RGB does not
  for (int64_t i = 0; i < 64; ++i) b.data[2 * 64 + size_t(i)] = 0.6f;
  MetricOptions rgb;
  rgb.rgb = true;
  const double p_luma = psnr(a, b);
  const double p_rgb = psnr(a, b, rgb);
  EXPECT_GT(p_luma, p_rgb);  // luma underweights the blue-only error
  // rgb mode closed form: MSE = 0.01/3
  EXPECT_NEAR(p_rgb, 10.0 * std::log10(3.0 / 0.01), 1e-4);  // float frame storage
}

TEST(Psnr, MatchesIndependentReferenceOnLuma) {
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    Image a = testutil::random_image(3, 24, 20, rng);
    Image b = testutil::random_image(3, 24, 20, rng);
    const double got = psnr(a, b);
    const double want = testutil::ref_psnr_1ch(luma601(a), luma601(b));
    EXPECT_NEAR(got, want, 1e-6);
  }
}

TEST(Ssim, IdenticalImagesGiveOne) {
  Rng rng(2);
  Image a = testutil::random_image(3, 24, 24, rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, InvertedStructureScoresWellBelowOne) {
  // high-contrast pattern vs its negative: structure inverted
  Image a(1, 32, 32);
  for (int64_t y = 0; y < 32; ++y)
    for (int64_t x = 0; x < 32; ++x) a.at(0, y, x) = ((x / 4 + y / 4) % 2) ? 0.9f : 0.1f;
  Image b = a;
  for (auto& v : b.data) v = 1.f - v;
  EXPECT_LT(ssim(a, b), 0.0);  // anti-correlated windows go negative
  EXPECT_GE(ssim(a, b), -1.0);
}

TEST(Ssim, ConstantImagesLuminanceTermOnly) {
  // two constants differ only in the luminance term:
  // ssim = (2 m1 m2 + c1) / (m1^2 + m2^2 + c1)
  Image a(1, 16, 16, 0.5f);
  Image b(1, 16, 16, 0.6f);
  const double c1 = 0.01 * 0.01;
  const double want = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
  EXPECT_NEAR(ssim(a, b), want, 1e-6);  // float frame storage
}

TEST(Ssim, MatchesIndependentReference) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    Image a = testutil::random_image(3, 20, 26, rng);
    Image b = testutil::random_image(3, 20, 26, rng);
    EXPECT_NEAR(ssim(a, b), testutil::ref_ssim_1ch(luma601(a), luma601(b)), 1e-6);
  }
}

TEST(Luma, StandardWeights) {
  Image rgb(3, 1, 1);
  rgb.data = {1.f, 0.f, 0.f};
  EXPECT_NEAR(luma601(rgb).data[0], (16.0 + 65.481) / 255.0, 1e-6);
  rgb.data = {0.f, 0.f, 0.f};
  EXPECT_NEAR(luma601(rgb).data[0], 16.0 / 255.0, 1e-6);
  rgb.data = {1.f, 1.f, 1.f};
  EXPECT_NEAR(luma601(rgb).data[0], 235.0 / 255.0, 1e-6);
}
