#pragma once

#include "fgdfpn/tape.hpp"
#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

namespace detail {

// (N, C*r^2, H, W) -> (N, C, H*r, W*r); out(c, h*r+i, w*r+j) = in(c*r^2 + i*r + j, h, w)
template <typename T, bool kInverse>
void shuffle_copy(const Tensor<T>& src, Tensor<T>& dst, int64_t r) {
  const Shape& lo = kInverse ? dst.shape() : src.shape();  // packed-channel side
  const int64_t N = lo.n(), C2 = lo.c(), H = lo.h(), W = lo.w();
  const int64_t C = C2 / (r * r);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < r; ++j) {
          const int64_t cp = c * r * r + i * r + j;
          for (int64_t h = 0; h < H; ++h) {
            if constexpr (kInverse) {
              T* d = dst.plane(n, cp) + h * W;
              const T* s = src.plane(n, c) + (h * r + i) * (W * r) + j;
              for (int64_t w = 0; w < W; ++w) d[w] = s[w * r];
            } else {
              const T* s = src.plane(n, cp) + h * W;
              T* d = dst.plane(n, c) + (h * r + i) * (W * r) + j;
              for (int64_t w = 0; w < W; ++w) d[w * r] = s[w];
            }
          }
        }
}

}  // namespace detail

template <typename T>
Tensor<T> pixel_shuffle_forward(const Tensor<T>& x, int64_t r) {
  require(r >= 1, "pixel_shuffle: factor must be >= 1");
  require(x.shape().rank() == 4, "pixel_shuffle: rank-4 input required");
  if (x.shape().c() % (r * r) != 0)
    throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(x.shape().c()) +
                                " not divisible by r^2 = " + std::to_string(r * r));
  Tensor<T> y(Shape{x.shape().n(), x.shape().c() / (r * r), x.shape().h() * r,
                    x.shape().w() * r});
  detail::shuffle_copy<T, false>(x, y, r);
  return y;
}

/// Inverse rearrangement of pixel_shuffle.
template <typename T>
Tensor<T> pixel_unshuffle_forward(const Tensor<T>& x, int64_t r) {
  require(r >= 1, "pixel_unshuffle: factor must be >= 1");
  require(x.shape().rank() == 4, "pixel_unshuffle: rank-4 input required");
  if (x.shape().h() % r != 0 || x.shape().w() % r != 0)
    throw std::invalid_argument("pixel_unshuffle: spatial dims not divisible by r");
  Tensor<T> y(Shape{x.shape().n(), x.shape().c() * r * r, x.shape().h() / r,
                    x.shape().w() / r});
  detail::shuffle_copy<T, true>(x, y, r);
  return y;
}

template <typename T>
Var<T> pixel_shuffle(Tape<T>& tape, const Var<T>& x, int64_t r) {
  Tensor<T> y = pixel_shuffle_forward(x.value(), r);
  Var<T> out = make_result(tape, std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record([x, out, r]() mutable {
      // gradient is the inverse permutation, accumulated
      Tensor<T> gup = pixel_unshuffle_forward(out.grad(), r);
      Tensor<T>& gx = x.grad();
      for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += gup[i];
    });
  }
  return out;
}

}  // namespace fgdfpn
