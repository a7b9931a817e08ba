#include <gtest/gtest.h>

#include "fgdfpn/gradcheck.hpp"
#include "fgdfpn/shuffle.hpp"

using namespace fgdfpn;

TEST(PixelShuffle, FactorOneIsIdentity) {
  Rng rng(51);
  Tensor<float> x = random_uniform<float>(rng, {2, 3, 4, 5}, -1, 1);
  Tensor<float> y = pixel_shuffle_forward(x, 1);
  ASSERT_EQ(y.shape(), x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(PixelShuffle, DefinitionalMapping) {
  Tensor<float> x(Shape{1, 4, 1, 1}, {10, 11, 12, 13});
  Tensor<float> y = pixel_shuffle_forward(x, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y.at(0, 0, 0, 0), 10);
  EXPECT_EQ(y.at(0, 0, 0, 1), 11);
  EXPECT_EQ(y.at(0, 0, 1, 0), 12);
  EXPECT_EQ(y.at(0, 0, 1, 1), 13);
}

TEST(PixelShuffle, UnshuffleInvertsBitExactly) {
  Rng rng(52);
  for (int64_t r : {1, 2, 3}) {
    Tensor<float> x = random_uniform<float>(rng, {2, 2 * r * r, 3, 4}, -1, 1);
    Tensor<float> back = pixel_unshuffle_forward(pixel_shuffle_forward(x, r), r);
    ASSERT_EQ(back.shape(), x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(back[i], x[i]);
  }
}

TEST(PixelShuffle, DivisibilityErrors) {
  Tape<float> t(false);
  Var<float> x = t.leaf(Tensor<float>(Shape{1, 6, 2, 2}));
  EXPECT_THROW(pixel_shuffle(t, x, 2), std::invalid_argument);
  Tensor<float> odd(Shape{1, 1, 3, 2});
  EXPECT_THROW(pixel_unshuffle_forward(odd, 2), std::invalid_argument);
}

TEST(PixelShuffle, GradientsMatchFiniteDifferences) {
  Rng rng(53);
  for (auto& c : gradcheck_registry())
    if (c.name == "pixel_shuffle" || c.name == "composition") {
      GradCheckResult r = c.run(rng);
      EXPECT_LT(r.max_rel_err, kGradCheckTol) << c.name;
    }
}
