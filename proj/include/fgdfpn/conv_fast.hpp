#pragma once

// Float fast paths for conv2d. Dispatched from conv.hpp; every path is
// covered by the same oracle and finite-difference suites as the generic
// loops (the double instantiation always uses the generic path).

#include <vector>

#include "fgdfpn/simd.hpp"
#include "fgdfpn/tensor.hpp"

#if FGDFPN_SIMD

namespace fgdfpn {
struct ConvSpec;
namespace fast {

using simd::PaddedPlanes;
using simd::SplitPlanes;

struct ConvDims {
  int64_t N, H, W, OH, OW, cin_g, cout_g, groups, pad;
};

// rows9 pointer table for one (group, output row): tap t of channel slot ci
// reads rows9[ci*9 + t][ox].
inline void s1_rows(const PaddedPlanes& xp, int64_t c0, int64_t cin, int64_t oy,
                    const float** rows9) {
  for (int64_t ci = 0; ci < cin; ++ci)
    for (int64_t ky = 0; ky < 3; ++ky) {
      const float* r = xp.row(c0 + ci, oy + ky);
      rows9[ci * 9 + ky * 3 + 0] = r;
      rows9[ci * 9 + ky * 3 + 1] = r + 1;
      rows9[ci * 9 + ky * 3 + 2] = r + 2;
    }
}

inline void s2_rows(const SplitPlanes& xs, int64_t c0, int64_t cin, int64_t oy,
                    const float** rows9) {
  for (int64_t ci = 0; ci < cin; ++ci)
    for (int64_t ky = 0; ky < 3; ++ky) {
      const int64_t y = 2 * oy + ky;
      rows9[ci * 9 + ky * 3 + 0] = xs.even(c0 + ci, y);
      rows9[ci * 9 + ky * 3 + 1] = xs.odd(c0 + ci, y);
      rows9[ci * 9 + ky * 3 + 2] = xs.even(c0 + ci, y) + 1;
    }
}

template <typename Spec>
inline ConvDims dims_of(const Tensor<float>& x, const Spec& spec) {
  return ConvDims{x.shape().n(),
                  x.shape().h(),
                  x.shape().w(),
                  spec.out_extent(x.shape().h()),
                  spec.out_extent(x.shape().w()),
                  spec.in_channels / spec.groups,
                  spec.out_channels / spec.groups,
                  spec.groups,
                  spec.padding};
}

template <typename Spec>
bool conv2d_forward_f32(const Tensor<float>& x, const Spec& spec, const Tensor<float>& w,
                        const Tensor<float>& b, Tensor<float>& y) {
  const ConvDims d = dims_of(x, spec);
  if (spec.kernel_h == 3 && spec.stride == 1 && d.pad <= 1) {
    PaddedPlanes xp;
    std::vector<const float*> rows9(d.cin_g * 9);
    for (int64_t n = 0; n < d.N; ++n) {
      xp.pack(x, n, d.pad);
      for (int64_t g = 0; g < d.groups; ++g)
        for (int64_t oy = 0; oy < d.OH; ++oy) {
          s1_rows(xp, g * d.cin_g, d.cin_g, oy, rows9.data());
          int64_t col = 0;
          for (; col + 2 <= d.cout_g; col += 2) {
            const int64_t co = g * d.cout_g + col;
            simd::conv9_two_rows(y.plane(n, co) + oy * d.OW, y.plane(n, co + 1) + oy * d.OW,
                                 b[co], b[co + 1], rows9.data(), w.data() + co * d.cin_g * 9,
                                 w.data() + (co + 1) * d.cin_g * 9, d.cin_g, 9, d.OW);
          }
          for (; col < d.cout_g; ++col) {
            const int64_t co = g * d.cout_g + col;
            simd::conv9_row(y.plane(n, co) + oy * d.OW, b[co], rows9.data(),
                            w.data() + co * d.cin_g * 9, d.cin_g, 9, d.OW);
          }
        }
    }
    return true;
  }
  if (spec.kernel_h == 3 && spec.stride == 2 && d.pad <= 1) {
    PaddedPlanes xp;
    SplitPlanes xs;
    std::vector<const float*> rows9(d.cin_g * 9);
    for (int64_t n = 0; n < d.N; ++n) {
      xp.pack(x, n, d.pad);
      xs.pack(xp);
      for (int64_t g = 0; g < d.groups; ++g)
        for (int64_t oy = 0; oy < d.OH; ++oy) {
          s2_rows(xs, g * d.cin_g, d.cin_g, oy, rows9.data());
          int64_t col = 0;
          for (; col + 2 <= d.cout_g; col += 2) {
            const int64_t co = g * d.cout_g + col;
            simd::conv9_two_rows(y.plane(n, co) + oy * d.OW, y.plane(n, co + 1) + oy * d.OW,
                                 b[co], b[co + 1], rows9.data(), w.data() + co * d.cin_g * 9,
                                 w.data() + (co + 1) * d.cin_g * 9, d.cin_g, 9, d.OW);
          }
          for (; col < d.cout_g; ++col) {
            const int64_t co = g * d.cout_g + col;
            simd::conv9_row(y.plane(n, co) + oy * d.OW, b[co], rows9.data(),
                            w.data() + co * d.cin_g * 9, d.cin_g, 9, d.OW);
          }
        }
    }
    return true;
  }
  if (spec.kernel_h == 1 && spec.stride == 1 && d.pad == 0) {
    const int64_t hw = d.H * d.W;
    const int64_t tile = 2048;  // keep the source slab cache-resident across co
    for (int64_t n = 0; n < d.N; ++n)
      for (int64_t g = 0; g < d.groups; ++g) {
        const float* src = x.plane(n, g * d.cin_g);
        for (int64_t px = 0; px < hw; px += tile) {
          const int64_t len = std::min(tile, hw - px);
          int64_t col = 0;
          for (; col + 2 <= d.cout_g; col += 2) {
            const int64_t co = g * d.cout_g + col;
            simd::gemm_two_rows(y.plane(n, co) + px, y.plane(n, co + 1) + px, b[co], b[co + 1],
                                src + px, hw, w.data() + co * d.cin_g,
                                w.data() + (co + 1) * d.cin_g, d.cin_g, 1, len, false);
          }
          if (col < d.cout_g) {
            const int64_t co = g * d.cout_g + col;
            simd::gemm_one_row(y.plane(n, co) + px, b[co], src + px, hw,
                               w.data() + co * d.cin_g, d.cin_g, 1, len, false);
          }
        }
      }
    return true;
  }
  return false;
}

template <typename Spec>
bool conv2d_backward_input_f32(const Tensor<float>& gy, const Spec& spec, const Tensor<float>& w,
                               Tensor<float>& gx) {
  const int64_t N = gx.shape().n(), H = gx.shape().h(), W = gx.shape().w();
  const int64_t OH = gy.shape().h(), OW = gy.shape().w();
  const int64_t cin_g = spec.in_channels / spec.groups;
  const int64_t cout_g = spec.out_channels / spec.groups;
  const int64_t p = spec.padding;

  if (spec.kernel_h == 3 && spec.stride == 1 && p <= 1) {
    // full correlation: conv9 over gy with transposed, flipped weights
    std::vector<float> wt(spec.out_channels * cin_g * 9);
    for (int64_t g = 0; g < spec.groups; ++g)
      for (int64_t cil = 0; cil < cin_g; ++cil)
        for (int64_t col = 0; col < cout_g; ++col)
          for (int64_t t = 0; t < 9; ++t)
            wt[((g * cin_g + cil) * cout_g + col) * 9 + t] =
                w[((g * cout_g + col) * cin_g + cil) * 9 + (8 - t)];
    PaddedPlanes gp;
    std::vector<const float*> rows9(cout_g * 9);
    std::vector<float> scratch(W), scratch2(W);
    for (int64_t n = 0; n < N; ++n) {
      gp.pack(gy, n, 2 - p);
      for (int64_t g = 0; g < spec.groups; ++g)
        for (int64_t iy = 0; iy < H; ++iy) {
          s1_rows(gp, g * cout_g, cout_g, iy, rows9.data());
          int64_t cil = 0;
          for (; cil + 2 <= cin_g; cil += 2) {
            simd::conv9_two_rows(scratch.data(), scratch2.data(), 0.f, 0.f, rows9.data(),
                                 wt.data() + (g * cin_g + cil) * cout_g * 9,
                                 wt.data() + (g * cin_g + cil + 1) * cout_g * 9, cout_g, 9, W);
            simd::axpy_row(gx.plane(n, g * cin_g + cil) + iy * W, scratch.data(), 1.f, W);
            simd::axpy_row(gx.plane(n, g * cin_g + cil + 1) + iy * W, scratch2.data(), 1.f, W);
          }
          for (; cil < cin_g; ++cil) {
            simd::conv9_row(scratch.data(), 0.f, rows9.data(),
                            wt.data() + (g * cin_g + cil) * cout_g * 9, cout_g, 9, W);
            simd::axpy_row(gx.plane(n, g * cin_g + cil) + iy * W, scratch.data(), 1.f, W);
          }
        }
    }
    return true;
  }

  if (spec.kernel_h == 3 && spec.stride == 2 && p == 1) {
    PaddedPlanes gp;
    const int64_t wh = W / 2 + (W % 2);
    std::vector<float> ev(wh + simd::kLanes), od(wh + simd::kLanes);
    for (int64_t n = 0; n < N; ++n) {
      gp.pack(gy, n, 1);
      const int64_t pstride = gp.rows * gp.pitch;
      for (int64_t g = 0; g < spec.groups; ++g) {
        const float* gbase = gp.row(g * cout_g, 0);
        for (int64_t cil = 0; cil < cin_g; ++cil) {
          const int64_t wbase = (g * cout_g * cin_g + cil) * 9;
          const int64_t wstep = cin_g * 9;
          for (int64_t iy = 0; iy < H; ++iy) {
            std::fill(ev.begin(), ev.end(), 0.f);
            std::fill(od.begin(), od.end(), 0.f);
            // valid ky have matching parity: oy = (iy + 1 - ky) / 2
            for (int64_t ky = (iy + 1) % 2; ky < 3; ky += 2) {
              const int64_t oy = (iy + 1 - ky) / 2;
              const float* src = gbase + (oy + 1) * gp.pitch;
              // even columns: tap kx=1; odd columns: kx=0 (shift 2) and kx=2 (shift 1)
              simd::gemm_one_row(ev.data(), 0.f, src + 1, pstride,
                                 w.data() + wbase + 3 * ky + 1, cout_g, wstep, wh, true);
              simd::gemm_one_row(od.data(), 0.f, src + 2, pstride,
                                 w.data() + wbase + 3 * ky + 0, cout_g, wstep, W / 2, true);
              simd::gemm_one_row(od.data(), 0.f, src + 1, pstride,
                                 w.data() + wbase + 3 * ky + 2, cout_g, wstep, W / 2, true);
            }
            float* gxrow = gx.plane(n, g * cin_g + cil) + iy * W;
            for (int64_t m = 0; m < W / 2; ++m) {
              gxrow[2 * m] += ev[m];
              gxrow[2 * m + 1] += od[m];
            }
            if (W % 2) gxrow[W - 1] += ev[wh - 1];
          }
        }
      }
    }
    return true;
  }

  if (spec.kernel_h == 1 && spec.stride == 1 && p == 0) {
    const int64_t hw = H * W;
    std::vector<float> wt(cin_g * cout_g);
    for (int64_t n = 0; n < N; ++n)
      for (int64_t g = 0; g < spec.groups; ++g) {
        for (int64_t cil = 0; cil < cin_g; ++cil)
          for (int64_t col = 0; col < cout_g; ++col)
            wt[cil * cout_g + col] = w[(g * cout_g + col) * cin_g + cil];
        const float* src = gy.plane(n, g * cout_g);
        const int64_t tile = 2048;
        for (int64_t px = 0; px < hw; px += tile) {
          const int64_t len = std::min(tile, hw - px);
          int64_t cil = 0;
          for (; cil + 2 <= cin_g; cil += 2) {
            const int64_t ci = g * cin_g + cil;
            simd::gemm_two_rows(gx.plane(n, ci) + px, gx.plane(n, ci + 1) + px, 0.f, 0.f,
                                src + px, hw, wt.data() + cil * cout_g,
                                wt.data() + (cil + 1) * cout_g, cout_g, 1, len, true);
          }
          if (cil < cin_g)
            simd::gemm_one_row(gx.plane(n, g * cin_g + cil) + px, 0.f, src + px, hw,
                               wt.data() + cil * cout_g, cout_g, 1, len, true);
        }
      }
    return true;
  }
  return false;
}

template <typename Spec>
bool conv2d_backward_weight_f32(const Tensor<float>& x, const Tensor<float>& gy,
                                const Spec& spec, Tensor<float>& gw, Tensor<float>& gb) {
  const int64_t N = x.shape().n(), H = x.shape().h(), W = x.shape().w();
  const int64_t OH = gy.shape().h(), OW = gy.shape().w();
  const int64_t cin_g = spec.in_channels / spec.groups;
  const int64_t cout_g = spec.out_channels / spec.groups;
  const int64_t p = spec.padding;
  (void)H;

  const bool s1 = spec.kernel_h == 3 && spec.stride == 1 && p <= 1;
  const bool s2 = spec.kernel_h == 3 && spec.stride == 2 && p <= 1;
  const bool k1 = spec.kernel_h == 1 && spec.stride == 1 && p == 0;
  if (!s1 && !s2 && !k1) return false;

  PaddedPlanes xp;
  SplitPlanes xs;
  const float* rows9[9];
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t co = 0; co < spec.out_channels; ++co)
      gb[co] += simd::sum_row(gy.plane(n, co), OH * OW);
    if (k1) {
      const int64_t hw = H * W;
      const int64_t tile = 2048;
      for (int64_t g = 0; g < spec.groups; ++g)
        for (int64_t px = 0; px < hw; px += tile) {
          const int64_t len = std::min(tile, hw - px);
          for (int64_t col = 0; col < cout_g; ++col) {
            const int64_t co = g * cout_g + col;
            for (int64_t cil = 0; cil < cin_g; ++cil)
              gw[co * cin_g + cil] +=
                  simd::dot_row(gy.plane(n, co) + px, x.plane(n, g * cin_g + cil) + px, len);
          }
        }
      continue;
    }
    xp.pack(x, n, p);
    if (s2) xs.pack(xp);
    for (int64_t g = 0; g < spec.groups; ++g)
      for (int64_t col = 0; col < cout_g; ++col) {
        const int64_t co = g * cout_g + col;
        const float* gyp = gy.plane(n, co);
        for (int64_t cil = 0; cil < cin_g; ++cil) {
          const int64_t c = g * cin_g + cil;
          float acc9[9] = {0};
          for (int64_t oy = 0; oy < OH; ++oy) {
            if (s1) {
              for (int64_t ky = 0; ky < 3; ++ky) {
                const float* r = xp.row(c, oy + ky);
                rows9[ky * 3 + 0] = r;
                rows9[ky * 3 + 1] = r + 1;
                rows9[ky * 3 + 2] = r + 2;
              }
            } else {
              for (int64_t ky = 0; ky < 3; ++ky) {
                const int64_t y = 2 * oy + ky;
                rows9[ky * 3 + 0] = xs.even(c, y);
                rows9[ky * 3 + 1] = xs.odd(c, y);
                rows9[ky * 3 + 2] = xs.even(c, y) + 1;
              }
            }
            simd::dot9_rows(gyp + oy * OW, rows9, OW, acc9);
          }
          float* wk = gw.data() + (co * cin_g + cil) * 9;
          for (int t = 0; t < 9; ++t) wk[t] += acc9[t];
        }
      }
  }
  return true;
}

}  // namespace fast
}  // namespace fgdfpn

#endif  // FGDFPN_SIMD
