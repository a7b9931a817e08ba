#include <gtest/gtest.h>

#include <cmath>

#include "fgdfpn/gradcheck.hpp"
#include "fgdfpn/sampling.hpp"

using namespace fgdfpn;

TEST(BilinearResize, SameDimsIsIdentity) {
  Rng rng(31);
  Tensor<float> x = random_uniform<float>(rng, {1, 3, 5, 7}, -1, 1);
  Tensor<float> y = bilinear_resize_forward(x, 5, 7);
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(BilinearResize, ConstantImageStaysConstant) {
  Tensor<double> x = Tensor<double>::full(Shape{1, 1, 4, 6}, 0.731);
  for (auto [oh, ow] : {std::pair<int64_t, int64_t>{9, 13}, {2, 3}, {1, 1}, {16, 2}}) {
    Tensor<double> y = bilinear_resize_forward(x, oh, ow);
    for (int64_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y[i], 0.731, 1e-12);
  }
}

TEST(BilinearResize, TwoByTwoToOneGivesCenterAverage) {
  // half-pixel centers: source coordinate 0.5 in both axes
  Tensor<double> x(Shape{1, 1, 2, 2}, {0, 1, 2, 3});
  Tensor<double> y = bilinear_resize_forward(x, 1, 1);
  EXPECT_DOUBLE_EQ(y[0], 1.5);
}

TEST(BilinearResize, GradientsMatchFiniteDifferences) {
  Rng rng(32);
  for (auto& c : gradcheck_registry())
    if (c.name == "bilinear_resize") {
      GradCheckResult r = c.run(rng);
      EXPECT_LT(r.max_rel_err, kGradCheckTol);
    }
}

TEST(FlowWarp, ZeroFlowIsExactIdentity) {
  Rng rng(33);
  Tensor<double> f = random_uniform<double>(rng, {2, 3, 6, 5}, -1, 1);
  Tensor<double> flow(Shape{2, 2, 6, 5});
  Tensor<double> y = flow_warp_forward(f, flow);
  for (int64_t i = 0; i < f.numel(); ++i) EXPECT_EQ(y[i], f[i]);
  // float path as well
  Tensor<float> ff = f.cast<float>();
  Tensor<float> yf = flow_warp_forward(ff, Tensor<float>(Shape{2, 2, 6, 5}));
  for (int64_t i = 0; i < ff.numel(); ++i) EXPECT_EQ(yf[i], ff[i]);
}

TEST(FlowWarp, ConstantImageInvariantUnderAnyFlow) {
  Rng rng(34);
  Tensor<double> f = Tensor<double>::full(Shape{1, 2, 5, 5}, 0.42);
  Tensor<double> flow = random_uniform<double>(rng, {1, 2, 5, 5}, -20, 20);
  Tensor<double> y = flow_warp_forward(f, flow);
  for (int64_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y[i], 0.42, 1e-12);
}

TEST(FlowWarp, HorizontalRampShiftClampsAtBorder) {
  // f(x) = x on a 1x8 row, dx = +1 everywhere -> out(x) = min(x+1, 7)
  Tensor<double> f(Shape{1, 1, 1, 8}, {0, 1, 2, 3, 4, 5, 6, 7});
  Tensor<double> flow(Shape{1, 2, 1, 8});
  for (int64_t x = 0; x < 8; ++x) flow.at(0, 0, 0, x) = 1.0;
  Tensor<double> y = flow_warp_forward(f, flow);
  for (int64_t x = 0; x < 8; ++x) EXPECT_DOUBLE_EQ(y.at(0, 0, 0, x), std::min<int64_t>(x + 1, 7));
}

TEST(FlowWarp, IntegerFlowEqualsClampedIndexShiftExactly) {
  Rng rng(35);
  const int64_t H = 7, W = 9, C = 2;
  Tensor<double> f = random_uniform<double>(rng, {1, C, H, W}, -1, 1);
  Tensor<double> flow(Shape{1, 2, H, W});
  for (int64_t i = 0; i < H * W; ++i) {
    flow.plane(0, 0)[i] = static_cast<double>(static_cast<int64_t>(rng.below(9)) - 4);
    flow.plane(0, 1)[i] = static_cast<double>(static_cast<int64_t>(rng.below(9)) - 4);
  }
  Tensor<double> y = flow_warp_forward(f, flow);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t py = 0; py < H; ++py)
      for (int64_t px = 0; px < W; ++px) {
        const int64_t sx =
            std::clamp<int64_t>(px + static_cast<int64_t>(flow.at(0, 0, py, px)), 0, W - 1);
        const int64_t sy =
            std::clamp<int64_t>(py + static_cast<int64_t>(flow.at(0, 1, py, px)), 0, H - 1);
        EXPECT_EQ(y.at(0, c, py, px), f.at(0, c, sy, sx));
      }
}

TEST(FlowWarp, ShapeMismatchRejected) {
  Tape<float> t(false);
  Var<float> f = t.leaf(Tensor<float>(Shape{1, 2, 4, 4}));
  EXPECT_THROW(flow_warp(t, f, t.leaf(Tensor<float>(Shape{1, 3, 4, 4}))),
               std::invalid_argument);
  EXPECT_THROW(flow_warp(t, f, t.leaf(Tensor<float>(Shape{1, 2, 5, 4}))),
               std::invalid_argument);
}

TEST(FlowWarp, GradientsMatchFiniteDifferences) {
  Rng rng(36);
  for (auto& c : gradcheck_registry())
    if (c.name == "flow_warp") {
      GradCheckResult r = c.run(rng);
      EXPECT_LT(r.max_rel_err, kGradCheckTol);
    }
}
