#pragma once

#include <cmath>
#include <vector>

#include "fgdfpn/tape.hpp"
#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

namespace detail {

/// Per-axis source index/weight table for align-corners-false resizing with
/// clamped sampling: s = (d + 0.5) * (in / out) - 0.5.
template <typename T>
struct ResizeAxis {
  std::vector<int64_t> i0, i1;
  std::vector<T> f;  // fraction toward i1

  ResizeAxis(int64_t in, int64_t out) : i0(out), i1(out), f(out) {
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (int64_t d = 0; d < out; ++d) {
      double s = (d + 0.5) * ratio - 0.5;
      s = std::min(std::max(s, 0.0), static_cast<double>(in - 1));
      const int64_t lo = static_cast<int64_t>(std::floor(s));
      i0[d] = lo;
      i1[d] = std::min(lo + 1, in - 1);
      f[d] = static_cast<T>(s - lo);
    }
  }
};

}  // namespace detail

template <typename T>
Tensor<T> bilinear_resize_forward(const Tensor<T>& x, int64_t out_h, int64_t out_w) {
  require(x.shape().rank() == 4, "bilinear_resize: rank-4 input required");
  require(out_h >= 1 && out_w >= 1, "bilinear_resize: output extents must be >= 1");
  const int64_t N = x.shape().n(), C = x.shape().c(), H = x.shape().h(), W = x.shape().w();
  detail::ResizeAxis<T> ay(H, out_h), ax(W, out_w);
  Tensor<T> y(Shape{N, C, out_h, out_w});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const T* xp = x.plane(n, c);
      T* yp = y.plane(n, c);
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const T* r0 = xp + ay.i0[oy] * W;
        const T* r1 = xp + ay.i1[oy] * W;
        const T fy = ay.f[oy];
        T* yrow = yp + oy * out_w;
        for (int64_t ox = 0; ox < out_w; ++ox) {
          const T fx = ax.f[ox];
          const T top = r0[ax.i0[ox]] * (T(1) - fx) + r0[ax.i1[ox]] * fx;
          const T bot = r1[ax.i0[ox]] * (T(1) - fx) + r1[ax.i1[ox]] * fx;
          yrow[ox] = top * (T(1) - fy) + bot * fy;
        }
      }
    }
  return y;
}

template <typename T>
Var<T> bilinear_resize(Tape<T>& tape, const Var<T>& x, int64_t out_h, int64_t out_w) {
  Tensor<T> y = bilinear_resize_forward(x.value(), out_h, out_w);
  Var<T> out = make_result(tape, std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record([x, out, out_h, out_w]() mutable {
      const Shape& s = x.shape();
      detail::ResizeAxis<T> ay(s.h(), out_h), ax(s.w(), out_w);
      const Tensor<T>& gy = out.grad();
      Tensor<T>& gx = x.grad();
      for (int64_t n = 0; n < s.n(); ++n)
        for (int64_t c = 0; c < s.c(); ++c) {
          T* gxp = gx.plane(n, c);
          const T* gyp = gy.plane(n, c);
          for (int64_t oy = 0; oy < out_h; ++oy) {
            const T fy = ay.f[oy];
            T* g0 = gxp + ay.i0[oy] * s.w();
            T* g1 = gxp + ay.i1[oy] * s.w();
            const T* gyrow = gyp + oy * out_w;
            for (int64_t ox = 0; ox < out_w; ++ox) {
              const T fx = ax.f[ox];
              const T g = gyrow[ox];
              g0[ax.i0[ox]] += g * (T(1) - fy) * (T(1) - fx);
              g0[ax.i1[ox]] += g * (T(1) - fy) * fx;
              g1[ax.i0[ox]] += g * fy * (T(1) - fx);
              g1[ax.i1[ox]] += g * fy * fx;
            }
          }
        }
    });
  }
  return out;
}

namespace detail {

template <typename T>
void check_warp_args(const Tensor<T>& f, const Tensor<T>& flow) {
  require(f.shape().rank() == 4 && flow.shape().rank() == 4, "flow_warp: rank-4 inputs required");
  if (flow.shape().c() != 2)
    throw std::invalid_argument("flow_warp: flow must have 2 channels, got " +
                                flow.shape().str());
  if (f.shape().n() != flow.shape().n() || f.shape().h() != flow.shape().h() ||
      f.shape().w() != flow.shape().w())
    throw std::invalid_argument("flow_warp: batch/spatial mismatch " + f.shape().str() +
                                " vs " + flow.shape().str());
}

}  // namespace detail

/// Samples f at p + flow(p). Flow channel 0 is horizontal displacement (dx),
/// channel 1 vertical (dy). Sample coordinates clamp to the border.
template <typename T>
Tensor<T> flow_warp_forward(const Tensor<T>& f, const Tensor<T>& flow) {
  detail::check_warp_args(f, flow);
  const int64_t N = f.shape().n(), C = f.shape().c(), H = f.shape().h(), W = f.shape().w();
  const int64_t plane = H * W;
  Tensor<T> y(f.shape());
  for (int64_t n = 0; n < N; ++n) {
    const T* fdx = flow.plane(n, 0);
    const T* fdy = flow.plane(n, 1);
    const T* fbase = f.plane(n, 0);
    T* ybase = y.plane(n, 0);
    for (int64_t py = 0; py < H; ++py)
      for (int64_t px = 0; px < W; ++px) {
        const int64_t i = py * W + px;
        T sx = px + fdx[i];
        T sy = py + fdy[i];
        sx = std::min(std::max(sx, T(0)), T(W - 1));
        sy = std::min(std::max(sy, T(0)), T(H - 1));
        const int64_t x0 = static_cast<int64_t>(std::floor(sx));
        const int64_t y0 = static_cast<int64_t>(std::floor(sy));
        const int64_t x1 = std::min(x0 + 1, W - 1);
        const int64_t y1 = std::min(y0 + 1, H - 1);
        const T fx = sx - x0, fy = sy - y0;
        const T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
        const T w10 = fy * (T(1) - fx), w11 = fy * fx;
        const int64_t o00 = y0 * W + x0, o01 = y0 * W + x1;
        const int64_t o10 = y1 * W + x0, o11 = y1 * W + x1;
        for (int64_t c = 0; c < C; ++c) {
          const T* fp = fbase + c * plane;
          ybase[c * plane + i] = w00 * fp[o00] + w01 * fp[o01] + w10 * fp[o10] + w11 * fp[o11];
        }
      }
  }
  return y;
}

template <typename T>
Var<T> flow_warp(Tape<T>& tape, const Var<T>& f, const Var<T>& flow) {
  Tensor<T> y = flow_warp_forward(f.value(), flow.value());
  const bool any = f.requires_grad() || flow.requires_grad();
  Var<T> out = make_result(tape, std::move(y), any);
  if (out.requires_grad()) {
    tape.record([f, flow, out]() mutable {
      const Tensor<T>& fv = f.value();
      const Tensor<T>& flv = flow.value();
      const Tensor<T>& gy = out.grad();
      const int64_t N = fv.shape().n(), C = fv.shape().c();
      const int64_t H = fv.shape().h(), W = fv.shape().w();
      const int64_t plane = H * W;
      const bool need_f = f.requires_grad(), need_flow = flow.requires_grad();
      for (int64_t n = 0; n < N; ++n) {
        const T* fdx = flv.plane(n, 0);
        const T* fdy = flv.plane(n, 1);
        const T* fbase = fv.plane(n, 0);
        const T* gybase = gy.plane(n, 0);
        for (int64_t py = 0; py < H; ++py)
          for (int64_t px = 0; px < W; ++px) {
            const int64_t i = py * W + px;
            T sxr = px + fdx[i];
            T syr = py + fdy[i];
            const bool inx = sxr > T(0) && sxr < T(W - 1);
            const bool iny = syr > T(0) && syr < T(H - 1);
            const T sx = std::min(std::max(sxr, T(0)), T(W - 1));
            const T sy = std::min(std::max(syr, T(0)), T(H - 1));
            const int64_t x0 = static_cast<int64_t>(std::floor(sx));
            const int64_t y0 = static_cast<int64_t>(std::floor(sy));
            const int64_t x1 = std::min(x0 + 1, W - 1);
            const int64_t y1 = std::min(y0 + 1, H - 1);
            const T fx = sx - x0, fy = sy - y0;
            const T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
            const T w10 = fy * (T(1) - fx), w11 = fy * fx;
            const int64_t o00 = y0 * W + x0, o01 = y0 * W + x1;
            const int64_t o10 = y1 * W + x0, o11 = y1 * W + x1;
            T gsx = 0, gsy = 0;
            for (int64_t c = 0; c < C; ++c) {
              const T g = gybase[c * plane + i];
              if (g == T(0)) continue;
              if (need_f) {
                T* gf = f.grad().plane(n, c);
                gf[o00] += g * w00;
                gf[o01] += g * w01;
                gf[o10] += g * w10;
                gf[o11] += g * w11;
              }
              if (need_flow) {
                const T* fp = fbase + c * plane;
                const T v00 = fp[o00], v01 = fp[o01], v10 = fp[o10], v11 = fp[o11];
                gsx += g * ((T(1) - fy) * (v01 - v00) + fy * (v11 - v10));
                gsy += g * ((T(1) - fx) * (v10 - v00) + fx * (v11 - v01));
              }
            }
            if (need_flow) {
              Tensor<T>& gfl = flow.grad();
              if (inx) gfl.plane(n, 0)[i] += gsx;
              if (iny) gfl.plane(n, 1)[i] += gsy;
            }
          }
      }
    });
  }
  return out;
}

}  // namespace fgdfpn
