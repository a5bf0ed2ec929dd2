#include <gtest/gtest.h>

#include "stinet/reconstruct.hpp"
#include "testutil.hpp"

using namespace stinet;
using testutil::random_tensor;

TEST(Recon, ShapeContract) {
  Rng rng(1);
  ReconHeads<float> heads(64, rng);
  auto lg = random_tensor<float>({64, 32, 32}, rng);
  auto hg = random_tensor<float>({64, 128, 128}, rng);
  auto vl = heads.lr_path(lg);
  EXPECT_EQ(vl.shape(), (std::vector<int64_t>{3, 128, 128}));
  auto v = heads(lg, hg);
  EXPECT_EQ(v.shape(), (std::vector<int64_t>{3, 128, 128}));
}

TEST(Recon, RejectsBadChannelCount) {
  Rng rng(2);
  EXPECT_THROW(ReconHeads<float>(24, rng), std::invalid_argument);  // 24 % 16 != 0
}

TEST(Recon, ZeroHrPathIsAdditiveIdentity) {
  Rng rng(3);
  ReconHeads<double> heads(16, rng);
  for (auto& v : heads.head_hr.b.values()) v = 0;
  auto lg = random_tensor<double>({16, 8, 8}, rng);
  auto hg = Tensor<double>::zeros({16, 32, 32});
  auto v = heads(lg, hg);
  auto vl = heads.lr_path(lg);
  for (int64_t i = 0; i < v.numel(); ++i) EXPECT_DOUBLE_EQ(v.data()[i], vl.data()[i]);
}

TEST(Recon, LinearWhenBiasFree) {
  Rng rng(4);
  ReconHeads<double> heads(16, rng);
  for (auto& v : heads.head_hr.b.values()) v = 0;
  for (auto& v : heads.head_lr.b.values()) v = 0;
  auto lg = random_tensor<double>({16, 8, 8}, rng);
  auto hg = random_tensor<double>({16, 32, 32}, rng);
  auto v1 = heads(lg, hg);
  auto v2 = heads(scale(lg, 2.5), scale(hg, 2.5));
  for (int64_t i = 0; i < v1.numel(); ++i) EXPECT_NEAR(v2.data()[i], 2.5 * v1.data()[i], 1e-12);
}

TEST(Recon, SequenceHelper) {
  Rng rng(5);
  ReconHeads<float> heads(16, rng);
  std::vector<Tensor<float>> lg, hg;
  for (int i = 0; i < 3; ++i) {
    lg.push_back(random_tensor<float>({16, 4, 4}, rng));
    hg.push_back(random_tensor<float>({16, 16, 16}, rng));
  }
  auto frames = reconstruct(heads, lg, hg);
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_EQ(frames[0].shape(), (std::vector<int64_t>{3, 16, 16}));
  lg.pop_back();
  EXPECT_THROW(reconstruct(heads, lg, hg), std::invalid_argument);
}
