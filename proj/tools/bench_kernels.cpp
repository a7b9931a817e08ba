// Micro-benchmark for the hot kernels at the shapes the model actually runs.
#include <chrono>
#include <cstdio>
#include <string>

#include "fgdfpn/conv.hpp"
#include "fgdfpn/deform.hpp"

using namespace fgdfpn;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void bench_conv(const std::string& label, int64_t n, int64_t cin, int64_t cout, int64_t hw,
                int64_t k, int64_t stride, int64_t groups, bool backward) {
  ConvSpec spec{cin, cout, k, k, stride, k == 3 ? 1 : 0, groups};
  Rng rng(1);
  Tensor<float> x = random_uniform<float>(rng, {n, cin, hw, hw}, -1, 1);
  Tensor<float> w = random_uniform<float>(rng, spec.weight_shape(), -1, 1);
  Tensor<float> b = random_uniform<float>(rng, spec.bias_shape(), -1, 1);
  const int64_t oh = spec.out_extent(hw), ow = spec.out_extent(hw);
  const double macs = double(n) * cout * oh * ow * (cin / groups) * k * k;

  Tensor<float> y = conv2d_forward(x, spec, w, b);
  int reps = std::max<int>(1, int(3e9 / (macs * 2)));
  double t0 = now_s();
  if (!backward) {
    for (int r = 0; r < reps; ++r) y = conv2d_forward(x, spec, w, b);
  } else {
    Tensor<float> gx(x.shape()), gw(w.shape()), gb(b.shape());
    for (int r = 0; r < reps; ++r) {
      conv2d_backward_input(y, spec, w, gx);
      conv2d_backward_weight(x, y, spec, gw, gb);
    }
  }
  double dt = (now_s() - t0) / reps;
  std::printf("%-34s %7.3f ms  %7.2f GFLOP/s\n", label.c_str(), dt * 1e3,
              macs * 2 * (backward ? 3 : 1) / dt / 1e9);
}

void bench_deform(int64_t n, int64_t cin, int64_t cout, int64_t hw, int64_t dg, bool backward) {
  ConvSpec spec{cin, cout, 3, 3, 1, 1, 1};
  Rng rng(1);
  Tensor<float> x = random_uniform<float>(rng, {n, cin, hw, hw}, -1, 1);
  Tensor<float> off = random_uniform<float>(rng, {n, dg * 18, hw, hw}, -2, 2);
  Tensor<float> mask = random_uniform<float>(rng, {n, dg * 9, hw, hw}, 0, 1);
  Tensor<float> w = random_uniform<float>(rng, spec.weight_shape(), -1, 1);
  Tensor<float> b = random_uniform<float>(rng, spec.bias_shape(), -1, 1);
  const double macs = double(n) * cout * hw * hw * cin * 9;

  Tensor<float> y = deform_conv2d_forward(x, off, mask, spec, dg, w, b);
  int reps = std::max<int>(1, int(2e9 / (macs * 2)));
  double t0 = now_s();
  if (!backward) {
    for (int r = 0; r < reps; ++r) y = deform_conv2d_forward(x, off, mask, spec, dg, w, b);
  } else {
    for (int r = 0; r < reps; ++r)
      auto gr = deform_conv2d_backward(x, off, mask, spec, dg, w, y);
  }
  double dt = (now_s() - t0) / reps;
  std::printf("deform n%lld c%lld->%lld %lldx%lld dg%lld %-5s %7.3f ms  %7.2f GFLOP/s(conv-eq)\n",
              (long long)n, (long long)cin, (long long)cout, (long long)hw, (long long)hw,
              (long long)dg, backward ? "bwd" : "fwd", dt * 1e3,
              macs * 2 * (backward ? 3 : 1) / dt / 1e9);
}

}  // namespace

int main() {
  std::printf("== conv2d forward ==\n");
  bench_conv("3x3 s1 8x16->16 96^2", 8, 16, 16, 96, 3, 1, 1, false);
  bench_conv("3x3 s1 8x64->16 96^2 (fuse1)", 8, 64, 16, 96, 3, 1, 1, false);
  bench_conv("3x3 s1 8x128->32 48^2 (fuse2)", 8, 128, 32, 48, 3, 1, 1, false);
  bench_conv("3x3 s2 8x16->32 96->48", 8, 16, 32, 96, 3, 2, 1, false);
  bench_conv("1x1 s1 8x128->16 96^2", 8, 128, 16, 96, 1, 1, 1, false);
  bench_conv("1x1 s1 8x216out 96^2 head", 8, 16, 216, 96, 1, 1, 1, false);
  bench_conv("3x3 s1 8x32->32 48^2", 8, 32, 32, 48, 3, 1, 1, false);
  std::printf("== conv2d forward+backward (3x total flops) ==\n");
  bench_conv("3x3 s1 8x16->16 96^2 bwd", 8, 16, 16, 96, 3, 1, 1, true);
  bench_conv("3x3 s2 8x16->32 96->48 bwd", 8, 16, 32, 96, 3, 2, 1, true);
  bench_conv("1x1 s1 8x128->16 96^2 bwd", 8, 128, 16, 96, 1, 1, 1, true);
  std::printf("== deform_conv2d ==\n");
  bench_deform(8, 64, 16, 96, 8, false);
  bench_deform(8, 128, 32, 48, 8, false);
  bench_deform(8, 64, 16, 96, 8, true);
  bench_deform(8, 128, 32, 48, 8, true);
  return 0;
}
