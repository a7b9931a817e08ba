#pragma once

#include <cmath>
#include <type_traits>
#include <vector>

#include "fgdfpn/conv.hpp"
#include "fgdfpn/deform_fast.hpp"
#include "fgdfpn/tape.hpp"
#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

namespace detail {

/// Bilinear corner geometry for one deformable sample position. Samples
/// outside the plane contribute zero, so a rigid grid (all offsets zero)
/// reproduces zero-padded convolution exactly.
template <typename T>
struct TapSample {
  int64_t o00 = -1, o01 = -1, o10 = -1, o11 = -1;  // -1 marks out-of-range
  T w00 = 0, w01 = 0, w10 = 0, w11 = 0;
  T fy = 0, fx = 0;
  bool live = false;

  void locate(T sy, T sx, int64_t H, int64_t W) {
    live = sy > T(-1) && sy < T(H) && sx > T(-1) && sx < T(W);
    if (!live) return;
    const int64_t y0 = static_cast<int64_t>(std::floor(sy));
    const int64_t x0 = static_cast<int64_t>(std::floor(sx));
    fy = sy - y0;
    fx = sx - x0;
    const bool y0in = y0 >= 0, y1in = y0 + 1 < H;
    const bool x0in = x0 >= 0, x1in = x0 + 1 < W;
    o00 = y0in && x0in ? y0 * W + x0 : -1;
    o01 = y0in && x1in ? y0 * W + x0 + 1 : -1;
    o10 = y1in && x0in ? (y0 + 1) * W + x0 : -1;
    o11 = y1in && x1in ? (y0 + 1) * W + x0 + 1 : -1;
    w00 = (T(1) - fy) * (T(1) - fx);
    w01 = (T(1) - fy) * fx;
    w10 = fy * (T(1) - fx);
    w11 = fy * fx;
  }

  T sample(const T* plane) const {
    if (!live) return T(0);
    T v = 0;
    if (o00 >= 0) v += w00 * plane[o00];
    if (o01 >= 0) v += w01 * plane[o01];
    if (o10 >= 0) v += w10 * plane[o10];
    if (o11 >= 0) v += w11 * plane[o11];
    return v;
  }
};

template <typename T>
void check_deform_args(const Tensor<T>& x, const Tensor<T>& offsets, const Tensor<T>& mask,
                       const ConvSpec& spec, int64_t deform_groups, const Tensor<T>& w,
                       const Tensor<T>& b) {
  spec.validate();
  require(spec.kernel_h == 3 && spec.kernel_w == 3 && spec.stride == 1 && spec.padding == 1,
          "deform_conv2d: restricted to 3x3 kernel, stride 1, pad 1");
  require(deform_groups >= 1, "deform_conv2d: deform_groups must be >= 1");
  require(x.shape().rank() == 4, "deform_conv2d: rank-4 input required");
  if (x.shape().c() != spec.in_channels)
    throw std::invalid_argument("deform_conv2d: input channels " +
                                std::to_string(x.shape().c()) + " != spec " +
                                std::to_string(spec.in_channels));
  if (x.shape().c() % deform_groups != 0)
    throw std::invalid_argument("deform_conv2d: channels " + std::to_string(x.shape().c()) +
                                " not divisible by deform_groups " +
                                std::to_string(deform_groups));
  const Shape off_want{x.shape().n(), deform_groups * 18, x.shape().h(), x.shape().w()};
  if (offsets.shape() != off_want)
    throw std::invalid_argument("deform_conv2d: offsets shape " + offsets.shape().str() +
                                ", expected " + off_want.str());
  const Shape mask_want{x.shape().n(), deform_groups * 9, x.shape().h(), x.shape().w()};
  if (mask.shape() != mask_want)
    throw std::invalid_argument("deform_conv2d: mask shape " + mask.shape().str() +
                                ", expected " + mask_want.str());
  if (w.shape() != spec.weight_shape())
    throw std::invalid_argument("deform_conv2d: weight shape " + w.shape().str() +
                                " does not match spec " + spec.weight_shape().str());
  if (b.shape() != spec.bias_shape())
    throw std::invalid_argument("deform_conv2d: bias shape " + b.shape().str());
}

}  // namespace detail

/// Modulated grouped deformable 3x3 convolution (stride 1, pad 1).
/// Offset channels are ordered per deform group, then per kernel tap, then
/// (dy, dx); mask channels per group then tap.
template <typename T>
Tensor<T> deform_conv2d_forward(const Tensor<T>& x, const Tensor<T>& offsets,
                                const Tensor<T>& mask, const ConvSpec& spec,
                                int64_t deform_groups, const Tensor<T>& w, const Tensor<T>& b) {
  detail::check_deform_args(x, offsets, mask, spec, deform_groups, w, b);
  const int64_t N = x.shape().n(), C = x.shape().c(), H = x.shape().h(), W = x.shape().w();
  const int64_t Cout = spec.out_channels;
  const int64_t cpdg = C / deform_groups;
  const int64_t cin_g = C / spec.groups, cout_g = Cout / spec.groups;
  Tensor<T> y(Shape{N, Cout, H, W});

#if FGDFPN_SIMD
  if constexpr (std::is_same_v<T, float>) {
    if (fast::deform_conv2d_forward_f32(x, offsets, mask, spec, deform_groups, w, b, y))
      return y;
  }
#endif

  std::vector<detail::TapSample<T>> geo(W);
  std::vector<T> ms(C * W);  // modulated samples for one (row, tap)

  for (int64_t n = 0; n < N; ++n) {
    for (int64_t co = 0; co < Cout; ++co) {
      T* yp = y.plane(n, co);
      std::fill(yp, yp + H * W, b[co]);
    }
    for (int64_t oy = 0; oy < H; ++oy) {
      for (int64_t k = 0; k < 9; ++k) {
        const int64_t ky = k / 3 - 1, kx = k % 3 - 1;
        for (int64_t g = 0; g < deform_groups; ++g) {
          const T* ody = offsets.plane(n, (g * 9 + k) * 2 + 0) + oy * W;
          const T* odx = offsets.plane(n, (g * 9 + k) * 2 + 1) + oy * W;
          const T* mrow = mask.plane(n, g * 9 + k) + oy * W;
          for (int64_t ox = 0; ox < W; ++ox)
            geo[ox].locate(T(oy + ky) + ody[ox], T(ox + kx) + odx[ox], H, W);
          for (int64_t cl = 0; cl < cpdg; ++cl) {
            const int64_t ci = g * cpdg + cl;
            const T* xp = x.plane(n, ci);
            T* FGDFPN_RESTRICT msrow = ms.data() + ci * W;
            for (int64_t ox = 0; ox < W; ++ox) msrow[ox] = mrow[ox] * geo[ox].sample(xp);
          }
        }
        // y[co] += w[co][ci][k] * ms[ci]
        for (int64_t gc = 0; gc < spec.groups; ++gc)
          for (int64_t col = 0; col < cout_g; ++col) {
            const int64_t co = gc * cout_g + col;
            T* FGDFPN_RESTRICT yrow = y.plane(n, co) + oy * W;
            const T* wbase = w.data() + (co * cin_g) * 9 + k;
            for (int64_t cil = 0; cil < cin_g; ++cil) {
              const T wv = wbase[cil * 9];
              const T* FGDFPN_RESTRICT msrow = ms.data() + (gc * cin_g + cil) * W;
              for (int64_t ox = 0; ox < W; ++ox) yrow[ox] += wv * msrow[ox];
            }
          }
      }
    }
  }
  return y;
}

template <typename T>
struct DeformGrads {
  Tensor<T> gx, goffsets, gmask, gw, gb;
};

template <typename T>
DeformGrads<T> deform_conv2d_backward(const Tensor<T>& x, const Tensor<T>& offsets,
                                      const Tensor<T>& mask, const ConvSpec& spec,
                                      int64_t deform_groups, const Tensor<T>& w,
                                      const Tensor<T>& gy) {
  const int64_t N = x.shape().n(), C = x.shape().c(), H = x.shape().h(), W = x.shape().w();
  const int64_t Cout = spec.out_channels;
  const int64_t cpdg = C / deform_groups;
  const int64_t cin_g = C / spec.groups, cout_g = Cout / spec.groups;

  DeformGrads<T> gr{Tensor<T>(x.shape()), Tensor<T>(offsets.shape()), Tensor<T>(mask.shape()),
                    Tensor<T>(w.shape()), Tensor<T>(Shape{Cout})};

#if FGDFPN_SIMD
  if constexpr (std::is_same_v<T, float>) {
    if (fast::deform_conv2d_backward_f32(x, offsets, mask, spec, deform_groups, w, gy, gr))
      return gr;
  }
#endif

  std::vector<detail::TapSample<T>> geo(W);
  std::vector<T> srow(C * W);  // raw (un-modulated) samples for one (row, tap)
  std::vector<T> arow(C * W);  // back-projected output gradient per input channel

  for (int64_t n = 0; n < N; ++n) {
    for (int64_t co = 0; co < Cout; ++co) {
      const T* gyp = gy.plane(n, co);
      T acc = 0;
      for (int64_t i = 0; i < H * W; ++i) acc += gyp[i];
      gr.gb[co] += acc;
    }
    for (int64_t oy = 0; oy < H; ++oy) {
      for (int64_t k = 0; k < 9; ++k) {
        const int64_t ky = k / 3 - 1, kx = k % 3 - 1;
        // a[ci] = sum_co w[co][ci][k] * gy[co]
        std::fill(arow.begin(), arow.end(), T(0));
        for (int64_t gc = 0; gc < spec.groups; ++gc)
          for (int64_t col = 0; col < cout_g; ++col) {
            const int64_t co = gc * cout_g + col;
            const T* FGDFPN_RESTRICT gyrow = gy.plane(n, co) + oy * W;
            const T* wbase = w.data() + (co * cin_g) * 9 + k;
            for (int64_t cil = 0; cil < cin_g; ++cil) {
              const T wv = wbase[cil * 9];
              T* FGDFPN_RESTRICT a = arow.data() + (gc * cin_g + cil) * W;
              for (int64_t ox = 0; ox < W; ++ox) a[ox] += wv * gyrow[ox];
            }
          }
        for (int64_t g = 0; g < deform_groups; ++g) {
          const T* ody = offsets.plane(n, (g * 9 + k) * 2 + 0) + oy * W;
          const T* odx = offsets.plane(n, (g * 9 + k) * 2 + 1) + oy * W;
          const T* mrow = mask.plane(n, g * 9 + k) + oy * W;
          T* gdy = gr.goffsets.plane(n, (g * 9 + k) * 2 + 0) + oy * W;
          T* gdx = gr.goffsets.plane(n, (g * 9 + k) * 2 + 1) + oy * W;
          T* gm = gr.gmask.plane(n, g * 9 + k) + oy * W;
          for (int64_t ox = 0; ox < W; ++ox)
            geo[ox].locate(T(oy + ky) + ody[ox], T(ox + kx) + odx[ox], H, W);
          for (int64_t cl = 0; cl < cpdg; ++cl) {
            const int64_t ci = g * cpdg + cl;
            const T* xp = x.plane(n, ci);
            T* gxp = gr.gx.plane(n, ci);
            const T* a = arow.data() + ci * W;
            T* s = srow.data() + ci * W;
            for (int64_t ox = 0; ox < W; ++ox) {
              const auto& t = geo[ox];
              if (!t.live) {
                s[ox] = 0;
                continue;
              }
              const T v00 = t.o00 >= 0 ? xp[t.o00] : T(0);
              const T v01 = t.o01 >= 0 ? xp[t.o01] : T(0);
              const T v10 = t.o10 >= 0 ? xp[t.o10] : T(0);
              const T v11 = t.o11 >= 0 ? xp[t.o11] : T(0);
              s[ox] = t.w00 * v00 + t.w01 * v01 + t.w10 * v10 + t.w11 * v11;
              const T gs = mrow[ox] * a[ox];  // d(loss)/d(sample)
              if (gs != T(0)) {
                if (t.o00 >= 0) gxp[t.o00] += gs * t.w00;
                if (t.o01 >= 0) gxp[t.o01] += gs * t.w01;
                if (t.o10 >= 0) gxp[t.o10] += gs * t.w10;
                if (t.o11 >= 0) gxp[t.o11] += gs * t.w11;
                gdy[ox] += gs * ((T(1) - t.fx) * (v10 - v00) + t.fx * (v11 - v01));
                gdx[ox] += gs * ((T(1) - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
              }
              gm[ox] += a[ox] * s[ox];
            }
          }
        }
        // dw[co][ci][k] += dot(gy[co], m*s[ci])
        for (int64_t g = 0; g < deform_groups; ++g) {
          const T* mrow = mask.plane(n, g * 9 + k) + oy * W;
          for (int64_t cl = 0; cl < cpdg; ++cl) {
            T* FGDFPN_RESTRICT s = srow.data() + (g * cpdg + cl) * W;
            for (int64_t ox = 0; ox < W; ++ox) s[ox] *= mrow[ox];
          }
        }
        for (int64_t gc = 0; gc < spec.groups; ++gc)
          for (int64_t col = 0; col < cout_g; ++col) {
            const int64_t co = gc * cout_g + col;
            const T* FGDFPN_RESTRICT gyrow = gy.plane(n, co) + oy * W;
            T* wbase = gr.gw.data() + (co * cin_g) * 9 + k;
            for (int64_t cil = 0; cil < cin_g; ++cil) {
              const T* FGDFPN_RESTRICT s = srow.data() + (gc * cin_g + cil) * W;
              T acc = 0;
              for (int64_t ox = 0; ox < W; ++ox) acc += gyrow[ox] * s[ox];
              wbase[cil * 9] += acc;
            }
          }
      }
    }
  }
  return gr;
}

template <typename T>
Var<T> deform_conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& offsets, const Var<T>& mask,
                     const ConvSpec& spec, int64_t deform_groups, const Var<T>& w,
                     const Var<T>& b) {
  Tensor<T> y = deform_conv2d_forward(x.value(), offsets.value(), mask.value(), spec,
                                      deform_groups, w.value(), b.value());
  const bool any = x.requires_grad() || offsets.requires_grad() || mask.requires_grad() ||
                   w.requires_grad() || b.requires_grad();
  Var<T> out = make_result(tape, std::move(y), any);
  if (out.requires_grad()) {
    tape.record([x, offsets, mask, w, b, out, spec, deform_groups]() mutable {
      DeformGrads<T> gr = deform_conv2d_backward(x.value(), offsets.value(), mask.value(),
                                                 spec, deform_groups, w.value(), out.grad());
      auto accum = [](const Var<T>& v, const Tensor<T>& g) {
        if (!v.requires_grad()) return;
        Tensor<T>& dst = v.grad();
        for (int64_t i = 0; i < dst.numel(); ++i) dst[i] += g[i];
      };
      accum(x, gr.gx);
      accum(offsets, gr.goffsets);
      accum(mask, gr.gmask);
      accum(w, gr.gw);
      accum(b, gr.gb);
    });
  }
  return out;
}

}  // namespace fgdfpn
