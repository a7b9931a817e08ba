// The float instantiations of conv2d / deform_conv2d take register-blocked
// fast paths; the double instantiations always run the generic reference
// loops. These tests pin the two against each other across the shape space
// the model uses, including ragged widths that exercise the vector tails.
#include <gtest/gtest.h>

#include "fgdfpn/conv.hpp"
#include "fgdfpn/deform.hpp"

using namespace fgdfpn;

namespace {

double scale_of(const Tensor<double>& t) {
  double m = 1.0;
  for (int64_t i = 0; i < t.numel(); ++i) m = std::max(m, std::abs(t[i]));
  return m;
}

void expect_close(const Tensor<float>& got, const Tensor<double>& want, double tol,
                  const std::string& what) {
  ASSERT_EQ(got.shape(), want.shape()) << what;
  const double s = scale_of(want);
  for (int64_t i = 0; i < got.numel(); ++i)
    ASSERT_NEAR(got[i], want[i], tol * s) << what << " at flat index " << i;
}

struct ConvCase {
  int64_t n, cin, cout, h, w, k, stride, pad, groups;
};

const ConvCase kConvCases[] = {
    {2, 16, 16, 12, 12, 3, 1, 1, 1}, {1, 8, 4, 7, 13, 3, 1, 1, 1},
    {2, 4, 8, 10, 10, 3, 1, 0, 1},   {1, 6, 6, 9, 11, 3, 1, 1, 2},
    {2, 16, 32, 12, 12, 3, 2, 1, 1}, {1, 8, 8, 11, 13, 3, 2, 1, 2},
    {2, 8, 8, 10, 10, 3, 2, 0, 1},   {2, 32, 16, 9, 9, 1, 1, 0, 1},
    {1, 12, 20, 8, 18, 1, 1, 0, 4},  {1, 3, 5, 6, 8, 1, 1, 0, 1},
};

}  // namespace

TEST(FastPath, ConvForwardMatchesGenericReference) {
  Rng rng(71);
  for (const auto& c : kConvCases) {
    ConvSpec spec{c.cin, c.cout, c.k, c.k, c.stride, c.pad, c.groups};
    Tensor<double> x = random_uniform<double>(rng, {c.n, c.cin, c.h, c.w}, -1, 1);
    Tensor<double> w = random_uniform<double>(rng, spec.weight_shape(), -1, 1);
    Tensor<double> b = random_uniform<double>(rng, spec.bias_shape(), -1, 1);
    Tensor<double> want = conv2d_forward(x, spec, w, b);
    Tensor<float> got = conv2d_forward(x.cast<float>(), spec, w.cast<float>(), b.cast<float>());
    expect_close(got, want, 1e-5, "conv fwd");
  }
}

TEST(FastPath, ConvBackwardMatchesGenericReference) {
  Rng rng(72);
  for (const auto& c : kConvCases) {
    ConvSpec spec{c.cin, c.cout, c.k, c.k, c.stride, c.pad, c.groups};
    Tensor<double> x = random_uniform<double>(rng, {c.n, c.cin, c.h, c.w}, -1, 1);
    Tensor<double> w = random_uniform<double>(rng, spec.weight_shape(), -1, 1);
    Shape os{c.n, c.cout, spec.out_extent(c.h), spec.out_extent(c.w)};
    Tensor<double> gy = random_uniform<double>(rng, os, -1, 1);

    Tensor<double> gx(x.shape()), gw(w.shape()), gb(spec.bias_shape());
    conv2d_backward_input(gy, spec, w, gx);
    conv2d_backward_weight(x, gy, spec, gw, gb);

    Tensor<float> gxf(x.shape()), gwf(w.shape()), gbf(spec.bias_shape());
    conv2d_backward_input(gy.cast<float>(), spec, w.cast<float>(), gxf);
    conv2d_backward_weight(x.cast<float>(), gy.cast<float>(), spec, gwf, gbf);

    expect_close(gxf, gx, 2e-5, "conv gx");
    expect_close(gwf, gw, 2e-5, "conv gw");
    expect_close(gbf, gb, 2e-5, "conv gb");
  }
}

namespace {

struct DeformCase {
  int64_t n, cin, cout, h, w, dg, groups;
};

// cpdg of 8/16 runs the channels-last path, others fall back to generic
const DeformCase kDeformCases[] = {
    {1, 8, 4, 9, 13, 1, 1}, {2, 16, 8, 8, 8, 2, 1},  {1, 16, 8, 7, 11, 1, 2},
    {1, 32, 8, 6, 10, 2, 2}, {1, 4, 4, 6, 9, 2, 1},  {2, 8, 6, 10, 12, 1, 1},
};

}  // namespace

TEST(FastPath, DeformForwardMatchesGenericReference) {
  Rng rng(73);
  for (const auto& c : kDeformCases) {
    ConvSpec spec{c.cin, c.cout, 3, 3, 1, 1, c.groups};
    Tensor<double> x = random_uniform<double>(rng, {c.n, c.cin, c.h, c.w}, -1, 1);
    Tensor<double> off = random_uniform<double>(rng, {c.n, c.dg * 18, c.h, c.w}, -3.3, 3.3);
    Tensor<double> mask = random_uniform<double>(rng, {c.n, c.dg * 9, c.h, c.w}, 0, 1);
    Tensor<double> w = random_uniform<double>(rng, spec.weight_shape(), -1, 1);
    Tensor<double> b = random_uniform<double>(rng, spec.bias_shape(), -1, 1);
    Tensor<double> want = deform_conv2d_forward(x, off, mask, spec, c.dg, w, b);
    Tensor<float> got =
        deform_conv2d_forward(x.cast<float>(), off.cast<float>(), mask.cast<float>(), spec,
                              c.dg, w.cast<float>(), b.cast<float>());
    expect_close(got, want, 2e-5, "deform fwd");
  }
}

TEST(FastPath, DeformBackwardMatchesGenericReference) {
  Rng rng(74);
  for (const auto& c : kDeformCases) {
    ConvSpec spec{c.cin, c.cout, 3, 3, 1, 1, c.groups};
    Tensor<double> x = random_uniform<double>(rng, {c.n, c.cin, c.h, c.w}, -1, 1);
    Tensor<double> off = random_uniform<double>(rng, {c.n, c.dg * 18, c.h, c.w}, -3.3, 3.3);
    Tensor<double> mask = random_uniform<double>(rng, {c.n, c.dg * 9, c.h, c.w}, 0, 1);
    Tensor<double> w = random_uniform<double>(rng, spec.weight_shape(), -1, 1);
    Tensor<double> gy = random_uniform<double>(rng, {c.n, c.cout, c.h, c.w}, -1, 1);

    DeformGrads<double> want = deform_conv2d_backward(x, off, mask, spec, c.dg, w, gy);
    DeformGrads<float> got =
        deform_conv2d_backward(x.cast<float>(), off.cast<float>(), mask.cast<float>(), spec,
                               c.dg, w.cast<float>(), gy.cast<float>());
    expect_close(got.gx, want.gx, 3e-5, "deform gx");
    expect_close(got.goffsets, want.goffsets, 3e-5, "deform goffsets");
    expect_close(got.gmask, want.gmask, 3e-5, "deform gmask");
    expect_close(got.gw, want.gw, 3e-5, "deform gw");
    expect_close(got.gb, want.gb, 3e-5, "deform gb");
  }
}
