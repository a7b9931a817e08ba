#pragma once

// Float fast path for the modulated grouped deformable convolution.
// Sampling runs on a channels-last copy of the input so each bilinear corner
// is one contiguous 8-wide load; the per-tap MAC phases reuse the GEMM row
// microkernel. Requires channels-per-deform-group to be a multiple of 8.

#include <cmath>
#include <vector>

#include "fgdfpn/simd.hpp"
#include "fgdfpn/tensor.hpp"

#if FGDFPN_SIMD

namespace fgdfpn {
namespace fast {

typedef int32_t vi8 __attribute__((vector_size(32)));

namespace dd {

using simd::load8;
using simd::splat8;
using simd::store8;
using simd::vf8;

inline vf8 bitsel(vi8 mask, vf8 a) {  // mask lanes are 0 or -1
  return (vf8)((vi8)a & mask);
}

typedef int32_t vi8u __attribute__((vector_size(32), aligned(4)));
inline void storei(int32_t* p, vi8 v) { reinterpret_cast<vi8u*>(p)[0] = v; }

inline vf8 shuf(vf8 a, vf8 b, vi8 idx) { return __builtin_shuffle(a, b, idx); }

inline float hsum(vf8 v) {
  vf8 s = v + shuf(v, v, vi8{4, 5, 6, 7, 0, 1, 2, 3});
  s += shuf(s, s, vi8{2, 3, 0, 1, 6, 7, 4, 5});
  s += shuf(s, s, vi8{1, 0, 3, 2, 5, 4, 7, 6});
  return s[0];
}

inline void transpose8x8(vf8 r[8]) {
  const vi8 lo = {0, 8, 1, 9, 4, 12, 5, 13};
  const vi8 hi = {2, 10, 3, 11, 6, 14, 7, 15};
  const vi8 dlo = {0, 1, 8, 9, 4, 5, 12, 13};
  const vi8 dhi = {2, 3, 10, 11, 6, 7, 14, 15};
  const vi8 qlo = {0, 1, 2, 3, 8, 9, 10, 11};
  const vi8 qhi = {4, 5, 6, 7, 12, 13, 14, 15};
  vf8 t[8], u[8];
  for (int i = 0; i < 4; ++i) {
    t[2 * i] = shuf(r[2 * i], r[2 * i + 1], lo);
    t[2 * i + 1] = shuf(r[2 * i], r[2 * i + 1], hi);
  }
  for (int i = 0; i < 2; ++i) {
    u[4 * i + 0] = shuf(t[4 * i + 0], t[4 * i + 2], dlo);
    u[4 * i + 1] = shuf(t[4 * i + 0], t[4 * i + 2], dhi);
    u[4 * i + 2] = shuf(t[4 * i + 1], t[4 * i + 3], dlo);
    u[4 * i + 3] = shuf(t[4 * i + 1], t[4 * i + 3], dhi);
  }
  for (int i = 0; i < 4; ++i) {
    r[i] = shuf(u[i], u[i + 4], qlo);
    r[i + 4] = shuf(u[i], u[i + 4], qhi);
  }
}

/// Bilinear corner geometry for one row of sampling positions, vectorized
/// over x. Corner addresses are clamped into range for safe loads; the
/// masked weights (wm) are zero for out-of-range corners, realizing the
/// zero-outside sampling convention. Validity masks and fractions are kept
/// for the backward pass.
struct RowGeometry {
  std::vector<int32_t> base00, base01, base10, base11;  // clamped row*W+col per corner
  std::vector<float> wm00, wm01, wm10, wm11;            // masked bilinear weights
  std::vector<float> m00, m01, m10, m11;                // corner validity, 0 or 1
  std::vector<float> fy, fx;

  void resize(int64_t w) {
    for (auto* v : {&base00, &base01, &base10, &base11}) v->resize(w);
    for (auto* v : {&wm00, &wm01, &wm10, &wm11, &m00, &m01, &m10, &m11, &fy, &fx})
      v->resize(w);
  }

  void compute(const float* ody, const float* odx, int64_t oy, int64_t ky, int64_t kx,
               int64_t H, int64_t W) {
    const vf8 vcy = splat8(static_cast<float>(oy + ky - 1));
    const vi8 vH = vi8{} + static_cast<int32_t>(H);
    const vi8 vW = vi8{} + static_cast<int32_t>(W);
    const vi8 zero = vi8{};
    const vi8 ones = vi8{} + 1;
    int64_t x = 0;
    for (; x + 8 <= W; x += 8) {
      const vi8 px = {int32_t(x),     int32_t(x + 1), int32_t(x + 2), int32_t(x + 3),
                      int32_t(x + 4), int32_t(x + 5), int32_t(x + 6), int32_t(x + 7)};
      const vf8 sy = vcy + load8(ody + x);
      const vf8 sx =
          __builtin_convertvector(px + (vi8{} + int32_t(kx - 1)), vf8) + load8(odx + x);
      vi8 ty = __builtin_convertvector(sy, vi8);
      vi8 tx = __builtin_convertvector(sx, vi8);
      ty += (vi8)(sy < __builtin_convertvector(ty, vf8));  // floor fix, compare gives 0/-1
      tx += (vi8)(sx < __builtin_convertvector(tx, vf8));
      const vf8 fyv = sy - __builtin_convertvector(ty, vf8);
      const vf8 fxv = sx - __builtin_convertvector(tx, vf8);
      const vi8 ty1 = ty + ones, tx1 = tx + ones;
      const vi8 iny0 = (ty >= zero) & (ty < vH);
      const vi8 iny1 = (ty1 >= zero) & (ty1 < vH);
      const vi8 inx0 = (tx >= zero) & (tx < vW);
      const vi8 inx1 = (tx1 >= zero) & (tx1 < vW);
      vi8 cy0 = ty > zero ? ty : zero;
      cy0 = cy0 < vH - ones ? cy0 : vH - ones;
      vi8 cy1 = ty1 > zero ? ty1 : zero;
      cy1 = cy1 < vH - ones ? cy1 : vH - ones;
      vi8 cx0 = tx > zero ? tx : zero;
      cx0 = cx0 < vW - ones ? cx0 : vW - ones;
      vi8 cx1 = tx1 > zero ? tx1 : zero;
      cx1 = cx1 < vW - ones ? cx1 : vW - ones;
      const vf8 oy0 = splat8(1.f) - fyv, ox0 = splat8(1.f) - fxv;
      const vf8 one = splat8(1.f);
      store8(m00.data() + x, bitsel(iny0 & inx0, one));
      store8(m01.data() + x, bitsel(iny0 & inx1, one));
      store8(m10.data() + x, bitsel(iny1 & inx0, one));
      store8(m11.data() + x, bitsel(iny1 & inx1, one));
      store8(wm00.data() + x, bitsel(iny0 & inx0, oy0 * ox0));
      store8(wm01.data() + x, bitsel(iny0 & inx1, oy0 * fxv));
      store8(wm10.data() + x, bitsel(iny1 & inx0, fyv * ox0));
      store8(wm11.data() + x, bitsel(iny1 & inx1, fyv * fxv));
      store8(fy.data() + x, fyv);
      store8(fx.data() + x, fxv);
      storei(base00.data() + x, cy0 * vW + cx0);
      storei(base01.data() + x, cy0 * vW + cx1);
      storei(base10.data() + x, cy1 * vW + cx0);
      storei(base11.data() + x, cy1 * vW + cx1);
    }
    for (; x < W; ++x) {
      const float sy = static_cast<float>(oy + ky - 1) + ody[x];
      const float sx = static_cast<float>(x + kx - 1) + odx[x];
      const float fy0 = std::floor(sy), fx0 = std::floor(sx);
      const int32_t y0 = static_cast<int32_t>(fy0);
      const int32_t x0 = static_cast<int32_t>(fx0);
      fy[x] = sy - fy0;
      fx[x] = sx - fx0;
      auto clampi = [](int32_t v, int32_t hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
      const bool iy0 = y0 >= 0 && y0 < H, iy1 = y0 + 1 >= 0 && y0 + 1 < H;
      const bool ix0 = x0 >= 0 && x0 < W, ix1 = x0 + 1 >= 0 && x0 + 1 < W;
      m00[x] = iy0 && ix0 ? 1.f : 0.f;
      m01[x] = iy0 && ix1 ? 1.f : 0.f;
      m10[x] = iy1 && ix0 ? 1.f : 0.f;
      m11[x] = iy1 && ix1 ? 1.f : 0.f;
      wm00[x] = m00[x] * (1 - fy[x]) * (1 - fx[x]);
      wm01[x] = m01[x] * (1 - fy[x]) * fx[x];
      wm10[x] = m10[x] * fy[x] * (1 - fx[x]);
      wm11[x] = m11[x] * fy[x] * fx[x];
      const int32_t cy0 = clampi(y0, int32_t(H - 1)), cy1 = clampi(y0 + 1, int32_t(H - 1));
      const int32_t cx0 = clampi(x0, int32_t(W - 1)), cx1 = clampi(x0 + 1, int32_t(W - 1));
      base00[x] = cy0 * W + cx0;
      base01[x] = cy0 * W + cx1;
      base10[x] = cy1 * W + cx0;
      base11[x] = cy1 * W + cx1;
    }
  }
};

/// channels-last copy of one batch element, with one vector of slack.
inline void pack_nhwc(const Tensor<float>& x, int64_t n, std::vector<float>& xt) {
  const int64_t C = x.shape().c(), H = x.shape().h(), W = x.shape().w();
  xt.assign(H * W * C + 8, 0.f);
  for (int64_t c = 0; c < C; ++c) {
    const float* p = x.plane(n, c);
    for (int64_t i = 0; i < H * W; ++i) xt[i * C + c] = p[i];
  }
}

}  // namespace dd

template <typename Spec>
bool deform_conv2d_forward_f32(const Tensor<float>& x, const Tensor<float>& offsets,
                               const Tensor<float>& mask, const Spec& spec,
                               int64_t deform_groups, const Tensor<float>& w,
                               const Tensor<float>& b, Tensor<float>& y) {
  const int64_t C = x.shape().c();
  const int64_t cpdg = C / deform_groups;
  if (cpdg % 8 != 0) return false;
  const int64_t N = x.shape().n(), H = x.shape().h(), W = x.shape().w();
  const int64_t Cout = spec.out_channels;
  const int64_t cin_g = C / spec.groups, cout_g = Cout / spec.groups;

  std::vector<float> xt;
  std::vector<float> ms(C * W + 8);
  dd::RowGeometry geo;
  geo.resize(W);

  for (int64_t n = 0; n < N; ++n) {
    dd::pack_nhwc(x, n, xt);
    for (int64_t co = 0; co < Cout; ++co) {
      float* yp = y.plane(n, co);
      std::fill(yp, yp + H * W, b[co]);
    }
    for (int64_t oy = 0; oy < H; ++oy) {
      for (int64_t k = 0; k < 9; ++k) {
        for (int64_t g = 0; g < deform_groups; ++g) {
          const float* ody = offsets.plane(n, (g * 9 + k) * 2 + 0) + oy * W;
          const float* odx = offsets.plane(n, (g * 9 + k) * 2 + 1) + oy * W;
          const float* mrow = mask.plane(n, g * 9 + k) + oy * W;
          geo.compute(ody, odx, oy, k / 3, k % 3, H, W);
          for (int64_t cb = 0; cb < cpdg; cb += 8) {
            const int64_t c0 = g * cpdg + cb;
            const float* base = xt.data() + c0;
            int64_t ox = 0;
            for (; ox + 8 <= W; ox += 8) {
              dd::vf8 blk[8];
              for (int l = 0; l < 8; ++l) {
                const int64_t j = ox + l;
                const dd::vf8 s = dd::splat8(geo.wm00[j]) * dd::load8(base + int64_t(geo.base00[j]) * C) +
                                  dd::splat8(geo.wm01[j]) * dd::load8(base + int64_t(geo.base01[j]) * C) +
                                  dd::splat8(geo.wm10[j]) * dd::load8(base + int64_t(geo.base10[j]) * C) +
                                  dd::splat8(geo.wm11[j]) * dd::load8(base + int64_t(geo.base11[j]) * C);
                blk[l] = dd::splat8(mrow[j]) * s;
              }
              dd::transpose8x8(blk);
              for (int l = 0; l < 8; ++l) dd::store8(ms.data() + (c0 + l) * W + ox, blk[l]);
            }
            for (; ox < W; ++ox) {
              const dd::vf8 s = dd::splat8(geo.wm00[ox]) * dd::load8(base + int64_t(geo.base00[ox]) * C) +
                                dd::splat8(geo.wm01[ox]) * dd::load8(base + int64_t(geo.base01[ox]) * C) +
                                dd::splat8(geo.wm10[ox]) * dd::load8(base + int64_t(geo.base10[ox]) * C) +
                                dd::splat8(geo.wm11[ox]) * dd::load8(base + int64_t(geo.base11[ox]) * C);
              const dd::vf8 msv = dd::splat8(mrow[ox]) * s;
              for (int l = 0; l < 8; ++l) ms[(c0 + l) * W + ox] = msv[l];
            }
          }
        }
        for (int64_t gc = 0; gc < spec.groups; ++gc) {
          const float* src = ms.data() + gc * cin_g * W;
          int64_t col = 0;
          for (; col + 2 <= cout_g; col += 2) {
            const int64_t co = gc * cout_g + col;
            simd::gemm_two_rows(y.plane(n, co) + oy * W, y.plane(n, co + 1) + oy * W, 0.f, 0.f,
                                src, W, w.data() + co * cin_g * 9 + k,
                                w.data() + (co + 1) * cin_g * 9 + k, cin_g, 9, W, true);
          }
          if (col < cout_g) {
            const int64_t co = gc * cout_g + col;
            simd::gemm_one_row(y.plane(n, co) + oy * W, 0.f, src, W,
                               w.data() + co * cin_g * 9 + k, cin_g, 9, W, true);
          }
        }
      }
    }
  }
  return true;
}

template <typename Spec, typename Grads>
bool deform_conv2d_backward_f32(const Tensor<float>& x, const Tensor<float>& offsets,
                                const Tensor<float>& mask, const Spec& spec,
                                int64_t deform_groups, const Tensor<float>& w,
                                const Tensor<float>& gy, Grads& gr) {
  const int64_t C = x.shape().c();
  const int64_t cpdg = C / deform_groups;
  if (cpdg % 8 != 0) return false;
  const int64_t N = x.shape().n(), H = x.shape().h(), W = x.shape().w();
  const int64_t Cout = spec.out_channels;
  const int64_t cin_g = C / spec.groups, cout_g = Cout / spec.groups;

  // weights transposed per tap: wt[((k*groups + gc)*cin_g + cil)*cout_g + col]
  std::vector<float> wt(9 * C * cout_g);
  for (int64_t k = 0; k < 9; ++k)
    for (int64_t gc = 0; gc < spec.groups; ++gc)
      for (int64_t cil = 0; cil < cin_g; ++cil)
        for (int64_t col = 0; col < cout_g; ++col)
          wt[((k * spec.groups + gc) * cin_g + cil) * cout_g + col] =
              w[((gc * cout_g + col) * cin_g + cil) * 9 + k];

  std::vector<float> xt, gxt;
  std::vector<float> ms(C * W + 8), arow(C * W + 8), at(W * C + 8);
  dd::RowGeometry geo;
  geo.resize(W);

  for (int64_t n = 0; n < N; ++n) {
    dd::pack_nhwc(x, n, xt);
    gxt.assign(H * W * C + 8, 0.f);
    for (int64_t co = 0; co < Cout; ++co) gr.gb[co] += simd::sum_row(gy.plane(n, co), H * W);
    for (int64_t oy = 0; oy < H; ++oy) {
      for (int64_t k = 0; k < 9; ++k) {
        // back-projected output gradient per input channel
        for (int64_t gc = 0; gc < spec.groups; ++gc) {
          const float* src = gy.plane(n, gc * cout_g) + oy * W;
          const float* wtk = wt.data() + (k * spec.groups + gc) * cin_g * cout_g;
          int64_t cil = 0;
          for (; cil + 2 <= cin_g; cil += 2) {
            const int64_t ci = gc * cin_g + cil;
            simd::gemm_two_rows(arow.data() + ci * W, arow.data() + (ci + 1) * W, 0.f, 0.f, src,
                                H * W, wtk + cil * cout_g, wtk + (cil + 1) * cout_g, cout_g, 1,
                                W, false);
          }
          if (cil < cin_g)
            simd::gemm_one_row(arow.data() + (gc * cin_g + cil) * W, 0.f, src, H * W,
                               wtk + cil * cout_g, cout_g, 1, W, false);
        }
        // channels-last view of the back-projection for the sampling pass
        for (int64_t c8 = 0; c8 < C; c8 += 8) {
          int64_t ox = 0;
          for (; ox + 8 <= W; ox += 8) {
            dd::vf8 blk[8];
            for (int l = 0; l < 8; ++l) blk[l] = dd::load8(arow.data() + (c8 + l) * W + ox);
            dd::transpose8x8(blk);
            for (int l = 0; l < 8; ++l) dd::store8(at.data() + (ox + l) * C + c8, blk[l]);
          }
          for (; ox < W; ++ox)
            for (int l = 0; l < 8; ++l) at[ox * C + c8 + l] = arow[(c8 + l) * W + ox];
        }
        for (int64_t g = 0; g < deform_groups; ++g) {
          const float* ody = offsets.plane(n, (g * 9 + k) * 2 + 0) + oy * W;
          const float* odx = offsets.plane(n, (g * 9 + k) * 2 + 1) + oy * W;
          const float* mrow = mask.plane(n, g * 9 + k) + oy * W;
          float* gdy = gr.goffsets.plane(n, (g * 9 + k) * 2 + 0) + oy * W;
          float* gdx = gr.goffsets.plane(n, (g * 9 + k) * 2 + 1) + oy * W;
          float* gm = gr.gmask.plane(n, g * 9 + k) + oy * W;
          geo.compute(ody, odx, oy, k / 3, k % 3, H, W);
          for (int64_t cb = 0; cb < cpdg; cb += 8) {
            const int64_t c0 = g * cpdg + cb;
            const float* base = xt.data() + c0;
            float* gbase = gxt.data() + c0;
            int64_t ox = 0;
            for (; ox + 8 <= W; ox += 8) {
              dd::vf8 blk[8];
              for (int l = 0; l < 8; ++l) {
                const int64_t j = ox + l;
                const float w00r = (1 - geo.fy[j]) * (1 - geo.fx[j]);
                const float w01r = (1 - geo.fy[j]) * geo.fx[j];
                const float w10r = geo.fy[j] * (1 - geo.fx[j]);
                const float w11r = geo.fy[j] * geo.fx[j];
                const int64_t o00 = int64_t(geo.base00[j]) * C;
                const int64_t o01 = int64_t(geo.base01[j]) * C;
                const int64_t o10 = int64_t(geo.base10[j]) * C;
                const int64_t o11 = int64_t(geo.base11[j]) * C;
                const dd::vf8 v00 = dd::splat8(geo.m00[j]) * dd::load8(base + o00);
                const dd::vf8 v01 = dd::splat8(geo.m01[j]) * dd::load8(base + o01);
                const dd::vf8 v10 = dd::splat8(geo.m10[j]) * dd::load8(base + o10);
                const dd::vf8 v11 = dd::splat8(geo.m11[j]) * dd::load8(base + o11);
                const dd::vf8 s = dd::splat8(w00r) * v00 + dd::splat8(w01r) * v01 +
                                  dd::splat8(w10r) * v10 + dd::splat8(w11r) * v11;
                const dd::vf8 a = dd::load8(at.data() + j * C + c0);
                const dd::vf8 gs = dd::splat8(mrow[j]) * a;
                gm[j] += dd::hsum(a * s);
                gdy[j] += dd::hsum(gs * (dd::splat8(1 - geo.fx[j]) * (v10 - v00) +
                                         dd::splat8(geo.fx[j]) * (v11 - v01)));
                gdx[j] += dd::hsum(gs * (dd::splat8(1 - geo.fy[j]) * (v01 - v00) +
                                         dd::splat8(geo.fy[j]) * (v11 - v10)));
                dd::store8(gbase + o00, dd::load8(gbase + o00) + dd::splat8(geo.wm00[j]) * gs);
                dd::store8(gbase + o01, dd::load8(gbase + o01) + dd::splat8(geo.wm01[j]) * gs);
                dd::store8(gbase + o10, dd::load8(gbase + o10) + dd::splat8(geo.wm10[j]) * gs);
                dd::store8(gbase + o11, dd::load8(gbase + o11) + dd::splat8(geo.wm11[j]) * gs);
                blk[l] = dd::splat8(mrow[j]) * s;
              }
              dd::transpose8x8(blk);
              for (int l = 0; l < 8; ++l) dd::store8(ms.data() + (c0 + l) * W + ox, blk[l]);
            }
            for (; ox < W; ++ox) {
              const int64_t j = ox;
              const float w00r = (1 - geo.fy[j]) * (1 - geo.fx[j]);
              const float w01r = (1 - geo.fy[j]) * geo.fx[j];
              const float w10r = geo.fy[j] * (1 - geo.fx[j]);
              const float w11r = geo.fy[j] * geo.fx[j];
              const int64_t o00 = int64_t(geo.base00[j]) * C;
              const int64_t o01 = int64_t(geo.base01[j]) * C;
              const int64_t o10 = int64_t(geo.base10[j]) * C;
              const int64_t o11 = int64_t(geo.base11[j]) * C;
              const dd::vf8 v00 = dd::splat8(geo.m00[j]) * dd::load8(base + o00);
              const dd::vf8 v01 = dd::splat8(geo.m01[j]) * dd::load8(base + o01);
              const dd::vf8 v10 = dd::splat8(geo.m10[j]) * dd::load8(base + o10);
              const dd::vf8 v11 = dd::splat8(geo.m11[j]) * dd::load8(base + o11);
              const dd::vf8 s = dd::splat8(w00r) * v00 + dd::splat8(w01r) * v01 +
                                dd::splat8(w10r) * v10 + dd::splat8(w11r) * v11;
              const dd::vf8 a = dd::load8(at.data() + j * C + c0);
              const dd::vf8 gs = dd::splat8(mrow[j]) * a;
              gm[j] += dd::hsum(a * s);
              gdy[j] += dd::hsum(gs * (dd::splat8(1 - geo.fx[j]) * (v10 - v00) +
                                       dd::splat8(geo.fx[j]) * (v11 - v01)));
              gdx[j] += dd::hsum(gs * (dd::splat8(1 - geo.fy[j]) * (v01 - v00) +
                                       dd::splat8(geo.fy[j]) * (v11 - v10)));
              dd::store8(gbase + o00, dd::load8(gbase + o00) + dd::splat8(geo.wm00[j]) * gs);
              dd::store8(gbase + o01, dd::load8(gbase + o01) + dd::splat8(geo.wm01[j]) * gs);
              dd::store8(gbase + o10, dd::load8(gbase + o10) + dd::splat8(geo.wm10[j]) * gs);
              dd::store8(gbase + o11, dd::load8(gbase + o11) + dd::splat8(geo.wm11[j]) * gs);
              const dd::vf8 msv = dd::splat8(mrow[j]) * s;
              for (int l = 0; l < 8; ++l) ms[(c0 + l) * W + j] = msv[l];
            }
          }
        }
        // weight gradient: per-tap dots of gy rows against modulated samples
        for (int64_t gc = 0; gc < spec.groups; ++gc)
          for (int64_t col = 0; col < cout_g; ++col) {
            const int64_t co = gc * cout_g + col;
            const float* gyrow = gy.plane(n, co) + oy * W;
            float* wk = gr.gw.data() + co * cin_g * 9 + k;
            for (int64_t cil = 0; cil < cin_g; ++cil)
              wk[cil * 9] += simd::dot_row(gyrow, ms.data() + (gc * cin_g + cil) * W, W);
          }
      }
    }
    // channels-last input gradient back to planar layout
    for (int64_t c = 0; c < C; ++c) {
      float* gxp = gr.gx.plane(n, c);
      const float* src = gxt.data() + c;
      for (int64_t i = 0; i < H * W; ++i) gxp[i] += src[i * C];
    }
  }
  return true;
}

}  // namespace fast
}  // namespace fgdfpn

#endif  // FGDFPN_SIMD
