#include <gtest/gtest.h>

#include "fgdfpn/conv.hpp"
#include "fgdfpn/deform.hpp"
#include "fgdfpn/gradcheck.hpp"

using namespace fgdfpn;

namespace {

struct DeformDraw {
  ConvSpec spec;
  int64_t dg;
  Tensor<double> x, w, b;
};

DeformDraw random_draw(Rng& rng) {
  const int64_t dg = 1 + static_cast<int64_t>(rng.below(3));
  const int64_t cpg = 1 + static_cast<int64_t>(rng.below(3));
  const int64_t cin = dg * cpg;
  const int64_t groups = (cin % 2 == 0 && rng.below(2)) ? 2 : 1;
  const int64_t cout = groups * (1 + static_cast<int64_t>(rng.below(3)));
  const int64_t h = 4 + static_cast<int64_t>(rng.below(5));
  const int64_t w = 4 + static_cast<int64_t>(rng.below(5));
  ConvSpec spec{cin, cout, 3, 3, 1, 1, groups};
  return {spec, dg, random_uniform<double>(rng, {2, cin, h, w}, -1, 1),
          random_uniform<double>(rng, spec.weight_shape(), -1, 1),
          random_uniform<double>(rng, spec.bias_shape(), -1, 1)};
}

}  // namespace

TEST(DeformConv, RigidGridEqualsConv2dOver100RandomDraws) {
  Rng rng(41);
  for (int draw = 0; draw < 100; ++draw) {
    DeformDraw d = random_draw(rng);
    const int64_t H = d.x.shape().h(), W = d.x.shape().w();
    Tensor<double> off(Shape{2, d.dg * 18, H, W});
    Tensor<double> mask = Tensor<double>::full(Shape{2, d.dg * 9, H, W}, 1.0);
    Tensor<double> got = deform_conv2d_forward(d.x, off, mask, d.spec, d.dg, d.w, d.b);
    Tensor<double> want = conv2d_forward(d.x, d.spec, d.w, d.b);
    ASSERT_EQ(got.shape(), want.shape());
    for (int64_t i = 0; i < got.numel(); ++i) ASSERT_NEAR(got[i], want[i], 1e-6);
  }
}

TEST(DeformConv, ConstantIntegerOffsetEqualsShiftThenConv) {
  // dy=0, dx=+1 on every tap: equals conv2d applied to the input shifted
  // left by one column. Border columns differ by construction (the shifted
  // image cannot represent the column the displaced taps still reach), so
  // the shift-then-conv oracle is asserted on the interior and a direct
  // zero-fill summation oracle covers the full plane.
  Rng rng(42);
  const int64_t H = 8, W = 8;
  ConvSpec spec{4, 3, 3, 3, 1, 1, 1};
  const int64_t dg = 2;
  Tensor<double> x = random_uniform<double>(rng, {1, 4, H, W}, -1, 1);
  Tensor<double> w = random_uniform<double>(rng, spec.weight_shape(), -1, 1);
  Tensor<double> b = random_uniform<double>(rng, spec.bias_shape(), -1, 1);
  Tensor<double> off(Shape{1, dg * 18, H, W});
  for (int64_t g = 0; g < dg; ++g)
    for (int64_t k = 0; k < 9; ++k) {
      double* dx = off.plane(0, (g * 9 + k) * 2 + 1);
      for (int64_t i = 0; i < H * W; ++i) dx[i] = 1.0;
    }
  Tensor<double> mask = Tensor<double>::full(Shape{1, dg * 9, H, W}, 1.0);
  Tensor<double> got = deform_conv2d_forward(x, off, mask, spec, dg, w, b);

  Tensor<double> shifted(x.shape());
  for (int64_t c = 0; c < 4; ++c)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t px = 0; px < W; ++px)
        shifted.at(0, c, y, px) = px + 1 < W ? x.at(0, c, y, px + 1) : 0.0;
  Tensor<double> want = conv2d_forward(shifted, spec, w, b);

  for (int64_t oy = 1; oy < H - 1; ++oy)
    for (int64_t ox = 1; ox < W - 2; ++ox)
      for (int64_t co = 0; co < 3; ++co)
        EXPECT_NEAR(got.at(0, co, oy, ox), want.at(0, co, oy, ox), 1e-9);

  // full plane: direct summation with the sampled column shifted by one
  for (int64_t oy = 0; oy < H; ++oy)
    for (int64_t ox = 0; ox < W; ++ox)
      for (int64_t co = 0; co < 3; ++co) {
        double acc = b[co];
        for (int64_t ci = 0; ci < 4; ++ci)
          for (int64_t ky = 0; ky < 3; ++ky)
            for (int64_t kx = 0; kx < 3; ++kx) {
              const int64_t iy = oy + ky - 1;
              const int64_t ix = ox + kx - 1 + 1;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += w.at(co, ci, ky, kx) * x.at(0, ci, iy, ix);
            }
        EXPECT_NEAR(got.at(0, co, oy, ox), acc, 1e-9);
      }
}

TEST(DeformConv, ZeroMaskGivesBiasBroadcast) {
  Rng rng(43);
  ConvSpec spec{4, 5, 3, 3, 1, 1, 1};
  Tensor<double> x = random_uniform<double>(rng, {1, 4, 6, 6}, -1, 1);
  Tensor<double> off = random_uniform<double>(rng, {1, 2 * 18, 6, 6}, -3, 3);
  Tensor<double> mask(Shape{1, 2 * 9, 6, 6});
  Tensor<double> w = random_uniform<double>(rng, spec.weight_shape(), -1, 1);
  Tensor<double> b = random_uniform<double>(rng, spec.bias_shape(), -1, 1);
  Tensor<double> y = deform_conv2d_forward(x, off, mask, spec, 2, w, b);
  for (int64_t co = 0; co < 5; ++co) {
    const double* p = y.plane(0, co);
    for (int64_t i = 0; i < 36; ++i) EXPECT_DOUBLE_EQ(p[i], b[co]);
  }
}

TEST(DeformConv, GradientsMatchFiniteDifferences) {
  Rng rng(44);
  for (auto& c : gradcheck_registry())
    if (c.name == "deform_conv2d") {
      GradCheckResult r = c.run(rng);
      EXPECT_LT(r.max_rel_err, kGradCheckTol);
      EXPECT_GE(r.checks, 5);
    }
}

TEST(DeformConv, ShapeAndGroupErrors) {
  Tape<float> t(false);
  ConvSpec spec{4, 4, 3, 3, 1, 1, 1};
  Var<float> x = t.leaf(Tensor<float>(Shape{1, 4, 6, 6}));
  Var<float> w = t.leaf(Tensor<float>(spec.weight_shape()));
  Var<float> b = t.leaf(Tensor<float>(spec.bias_shape()));
  Var<float> off_ok = t.leaf(Tensor<float>(Shape{1, 36, 6, 6}));
  Var<float> mask_ok = t.leaf(Tensor<float>(Shape{1, 18, 6, 6}));

  // offset channel count must be dg*18
  Var<float> off_bad = t.leaf(Tensor<float>(Shape{1, 30, 6, 6}));
  EXPECT_THROW(deform_conv2d(t, x, off_bad, mask_ok, spec, 2, w, b), std::invalid_argument);
  // mask channel count must be dg*9
  Var<float> mask_bad = t.leaf(Tensor<float>(Shape{1, 9, 6, 6}));
  EXPECT_THROW(deform_conv2d(t, x, off_ok, mask_bad, spec, 2, w, b), std::invalid_argument);
  // channels must divide deform groups
  EXPECT_THROW(deform_conv2d(t, x, off_ok, mask_ok, spec, 3, w, b), std::invalid_argument);
  // only 3x3 stride-1 pad-1 supported
  ConvSpec s2{4, 4, 3, 3, 2, 1, 1};
  EXPECT_THROW(deform_conv2d(t, x, off_ok, mask_ok, s2, 2, w, b), std::invalid_argument);
}
