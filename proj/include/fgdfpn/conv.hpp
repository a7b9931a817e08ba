#pragma once

#include <algorithm>
#include <string>
#include <type_traits>

#include "fgdfpn/conv_fast.hpp"
#include "fgdfpn/ops.hpp"
#include "fgdfpn/simd.hpp"
#include "fgdfpn/tape.hpp"
#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

/// Geometry of a 2-D cross-correlation with zero padding.
struct ConvSpec {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t kernel_h = 3;
  int64_t kernel_w = 3;
  int64_t stride = 1;
  int64_t padding = 1;
  int64_t groups = 1;

  void validate() const {
    require(in_channels >= 1 && out_channels >= 1, "ConvSpec: channel counts must be >= 1");
    require(kernel_h == kernel_w && (kernel_h == 1 || kernel_h == 3),
            "ConvSpec: kernel must be 1x1 or 3x3");
    require(stride == 1 || stride == 2, "ConvSpec: stride must be 1 or 2");
    require(padding >= 0, "ConvSpec: padding must be >= 0");
    require(groups >= 1, "ConvSpec: groups must be >= 1");
    require(in_channels % groups == 0 && out_channels % groups == 0,
            "ConvSpec: in/out channels must be divisible by groups");
  }

  int64_t out_extent(int64_t in) const {
    return (in + 2 * padding - kernel_h) / stride + 1;
  }

  Shape weight_shape() const {
    return Shape{out_channels, in_channels / groups, kernel_h, kernel_w};
  }
  Shape bias_shape() const { return Shape{out_channels}; }
};

namespace detail {

template <typename T>
void check_conv_args(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& w,
                     const Tensor<T>& b) {
  spec.validate();
  require(x.shape().rank() == 4, "conv2d: input must be rank 4, got " + x.shape().str());
  if (x.shape().c() != spec.in_channels)
    throw std::invalid_argument("conv2d: input has " + std::to_string(x.shape().c()) +
                                " channels, spec expects " + std::to_string(spec.in_channels));
  if (w.shape() != spec.weight_shape())
    throw std::invalid_argument("conv2d: weight shape " + w.shape().str() +
                                " does not match spec " + spec.weight_shape().str());
  if (b.shape() != spec.bias_shape())
    throw std::invalid_argument("conv2d: bias shape " + b.shape().str() +
                                " does not match spec " + spec.bias_shape().str());
  if (spec.out_extent(x.shape().h()) < 1 || spec.out_extent(x.shape().w()) < 1)
    throw std::invalid_argument("conv2d: output extent < 1 for input " + x.shape().str());
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& w,
                         const Tensor<T>& b) {
  detail::check_conv_args(x, spec, w, b);
  const int64_t N = x.shape().n(), H = x.shape().h(), W = x.shape().w();
  const int64_t OH = spec.out_extent(H), OW = spec.out_extent(W);
  const int64_t kh = spec.kernel_h, kw = spec.kernel_w, s = spec.stride, p = spec.padding;
  const int64_t cin_g = spec.in_channels / spec.groups;
  const int64_t cout_g = spec.out_channels / spec.groups;
  Tensor<T> y(Shape{N, spec.out_channels, OH, OW});

#if FGDFPN_SIMD
  if constexpr (std::is_same_v<T, float>) {
    if (fast::conv2d_forward_f32(x, spec, w, b, y)) return y;
  }
#endif

  for (int64_t n = 0; n < N; ++n) {
    for (int64_t g = 0; g < spec.groups; ++g) {
      for (int64_t col = 0; col < cout_g; ++col) {
        const int64_t co = g * cout_g + col;
        T* FGDFPN_RESTRICT yp = y.plane(n, co);
        std::fill(yp, yp + OH * OW, b[co]);
        const T* wbase = w.data() + co * cin_g * kh * kw;
        for (int64_t oy = 0; oy < OH; ++oy) {
          T* FGDFPN_RESTRICT yrow = yp + oy * OW;
          for (int64_t cil = 0; cil < cin_g; ++cil) {
            const T* xp = x.plane(n, g * cin_g + cil);
            const T* wk = wbase + cil * kh * kw;
            for (int64_t ky = 0; ky < kh; ++ky) {
              const int64_t iy = oy * s + ky - p;
              if (iy < 0 || iy >= H) continue;
              const T* FGDFPN_RESTRICT xrowb = xp + iy * W;
              for (int64_t kx = 0; kx < kw; ++kx) {
                const T wv = wk[ky * kw + kx];
                if (s == 1) {
                  const int64_t lo = std::max<int64_t>(0, p - kx);
                  const int64_t hi = std::min(OW, W + p - kx);
                  const T* FGDFPN_RESTRICT xrow = xrowb + kx - p;
                  for (int64_t ox = lo; ox < hi; ++ox) yrow[ox] += wv * xrow[ox];
                } else {
                  // ox*s + kx - p in [0, W)
                  const int64_t lo = std::max<int64_t>(0, (p - kx + s - 1) / s);
                  const int64_t hi = std::min(OW, (W - 1 - kx + p) / s + 1);
                  for (int64_t ox = lo; ox < hi; ++ox)
                    yrow[ox] += wv * xrowb[ox * s + kx - p];
                }
              }
            }
          }
        }
      }
    }
  }
  return y;
}

/// Gradient w.r.t. the input, gather form (each dx element owned by one pass).
template <typename T>
void conv2d_backward_input(const Tensor<T>& gy, const ConvSpec& spec, const Tensor<T>& w,
                           Tensor<T>& gx) {
  const int64_t N = gx.shape().n(), H = gx.shape().h(), W = gx.shape().w();
  const int64_t OH = gy.shape().h(), OW = gy.shape().w();
  const int64_t kh = spec.kernel_h, kw = spec.kernel_w, s = spec.stride, p = spec.padding;
  const int64_t cin_g = spec.in_channels / spec.groups;
  const int64_t cout_g = spec.out_channels / spec.groups;

#if FGDFPN_SIMD
  if constexpr (std::is_same_v<T, float>) {
    if (fast::conv2d_backward_input_f32(gy, spec, w, gx)) return;
  }
#endif

  if (s == 1) {
    // dx[iy][ix] += w[ky][kx] * gy[iy-ky+p][ix-kx+p]
    for (int64_t n = 0; n < N; ++n)
      for (int64_t g = 0; g < spec.groups; ++g)
        for (int64_t cil = 0; cil < cin_g; ++cil) {
          T* gxp = gx.plane(n, g * cin_g + cil);
          for (int64_t col = 0; col < cout_g; ++col) {
            const int64_t co = g * cout_g + col;
            const T* gyp = gy.plane(n, co);
            const T* wk = w.data() + (co * cin_g + cil) * kh * kw;
            for (int64_t iy = 0; iy < H; ++iy) {
              T* FGDFPN_RESTRICT gxrow = gxp + iy * W;
              for (int64_t ky = 0; ky < kh; ++ky) {
                const int64_t oy = iy - ky + p;
                if (oy < 0 || oy >= OH) continue;
                for (int64_t kx = 0; kx < kw; ++kx) {
                  const T wv = wk[ky * kw + kx];
                  const int64_t lo = std::max<int64_t>(0, kx - p);
                  const int64_t hi = std::min(W, OW + kx - p);
                  const T* FGDFPN_RESTRICT gyrow = gyp + oy * OW - kx + p;
                  for (int64_t ix = lo; ix < hi; ++ix) gxrow[ix] += wv * gyrow[ix];
                }
              }
            }
          }
        }
  } else {
    // scatter form; stride-2 layers are a small share of the total cost
    for (int64_t n = 0; n < N; ++n)
      for (int64_t g = 0; g < spec.groups; ++g)
        for (int64_t col = 0; col < cout_g; ++col) {
          const int64_t co = g * cout_g + col;
          const T* gyp = gy.plane(n, co);
          for (int64_t cil = 0; cil < cin_g; ++cil) {
            T* gxp = gx.plane(n, g * cin_g + cil);
            const T* wk = w.data() + (co * cin_g + cil) * kh * kw;
            for (int64_t oy = 0; oy < OH; ++oy)
              for (int64_t ky = 0; ky < kh; ++ky) {
                const int64_t iy = oy * s + ky - p;
                if (iy < 0 || iy >= H) continue;
                for (int64_t kx = 0; kx < kw; ++kx) {
                  const T wv = wk[ky * kw + kx];
                  const int64_t lo = std::max<int64_t>(0, (p - kx + s - 1) / s);
                  const int64_t hi = std::min(OW, (W - 1 - kx + p) / s + 1);
                  const T* gyrow = gyp + oy * OW;
                  T* gxrow = gxp + iy * W + kx - p;
                  for (int64_t ox = lo; ox < hi; ++ox) gxrow[ox * s] += wv * gyrow[ox];
                }
              }
          }
        }
  }
}

template <typename T>
void conv2d_backward_weight(const Tensor<T>& x, const Tensor<T>& gy, const ConvSpec& spec,
                            Tensor<T>& gw, Tensor<T>& gb) {
  const int64_t N = x.shape().n(), H = x.shape().h(), W = x.shape().w();
  const int64_t OH = gy.shape().h(), OW = gy.shape().w();
  const int64_t kh = spec.kernel_h, kw = spec.kernel_w, s = spec.stride, p = spec.padding;
  const int64_t cin_g = spec.in_channels / spec.groups;
  const int64_t cout_g = spec.out_channels / spec.groups;

#if FGDFPN_SIMD
  if constexpr (std::is_same_v<T, float>) {
    if (fast::conv2d_backward_weight_f32(x, gy, spec, gw, gb)) return;
  }
#endif

  for (int64_t n = 0; n < N; ++n)
    for (int64_t g = 0; g < spec.groups; ++g)
      for (int64_t col = 0; col < cout_g; ++col) {
        const int64_t co = g * cout_g + col;
        const T* gyp = gy.plane(n, co);
        T bacc = 0;
        for (int64_t i = 0; i < OH * OW; ++i) bacc += gyp[i];
        gb[co] += bacc;
        for (int64_t cil = 0; cil < cin_g; ++cil) {
          const T* xp = x.plane(n, g * cin_g + cil);
          T* wk = gw.data() + (co * cin_g + cil) * kh * kw;
          for (int64_t ky = 0; ky < kh; ++ky)
            for (int64_t kx = 0; kx < kw; ++kx) {
              T acc = 0;
              for (int64_t oy = 0; oy < OH; ++oy) {
                const int64_t iy = oy * s + ky - p;
                if (iy < 0 || iy >= H) continue;
                const int64_t lo = s == 1 ? std::max<int64_t>(0, p - kx)
                                          : std::max<int64_t>(0, (p - kx + s - 1) / s);
                const int64_t hi = s == 1 ? std::min(OW, W + p - kx)
                                          : std::min(OW, (W - 1 - kx + p) / s + 1);
                const T* FGDFPN_RESTRICT gyrow = gyp + oy * OW;
                if (s == 1) {
                  const T* FGDFPN_RESTRICT xrow = xp + iy * W + kx - p;
                  for (int64_t ox = lo; ox < hi; ++ox) acc += gyrow[ox] * xrow[ox];
                } else {
                  const T* xrow = xp + iy * W + kx - p;
                  for (int64_t ox = lo; ox < hi; ++ox) acc += gyrow[ox] * xrow[ox * s];
                }
              }
              wk[ky * kw + kx] += acc;
            }
        }
      }
}

/// Tape-registered 2-D convolution (cross-correlation, zero padding).
template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& x, const ConvSpec& spec, const Var<T>& w,
              const Var<T>& b) {
  Tensor<T> y = conv2d_forward(x.value(), spec, w.value(), b.value());
  const bool any = x.requires_grad() || w.requires_grad() || b.requires_grad();
  Var<T> out = make_result(tape, std::move(y), any);
  if (out.requires_grad()) {
    tape.record([x, w, b, out, spec]() mutable {
      const Tensor<T>& gy = out.grad();
      if (x.requires_grad()) conv2d_backward_input(gy, spec, w.value(), x.grad());
      if (w.requires_grad() || b.requires_grad()) {
        Tensor<T> gw_local(w.shape());
        Tensor<T> gb_local(b.shape());
        conv2d_backward_weight(x.value(), gy, spec, gw_local, gb_local);
        if (w.requires_grad()) {
          Tensor<T>& gw = w.grad();
          for (int64_t i = 0; i < gw.numel(); ++i) gw[i] += gw_local[i];
        }
        if (b.requires_grad()) {
          Tensor<T>& gb = b.grad();
          for (int64_t i = 0; i < gb.numel(); ++i) gb[i] += gb_local[i];
        }
      }
    });
  }
  return out;
}

}  // namespace fgdfpn
