#pragma once

#include <cmath>
#include <vector>

#include "fgdfpn/tape.hpp"
#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

namespace detail {

template <typename T>
void check_same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise unary
// ---------------------------------------------------------------------------

template <typename T>
Var<T> tanh(Tape<T>& tape, const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (int64_t i = 0; i < xv.numel(); ++i) y[i] = std::tanh(xv[i]);
  Var<T> out = make_result(tape, std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record([x, out]() mutable {
      const Tensor<T>& yv = out.value();
      const Tensor<T>& gy = out.grad();
      Tensor<T>& gx = x.grad();
      for (int64_t i = 0; i < yv.numel(); ++i) gx[i] += gy[i] * (T(1) - yv[i] * yv[i]);
    });
  }
  return out;
}

template <typename T>
Var<T> sigmoid(Tape<T>& tape, const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (int64_t i = 0; i < xv.numel(); ++i) y[i] = T(1) / (T(1) + std::exp(-xv[i]));
  Var<T> out = make_result(tape, std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record([x, out]() mutable {
      const Tensor<T>& yv = out.value();
      const Tensor<T>& gy = out.grad();
      Tensor<T>& gx = x.grad();
      for (int64_t i = 0; i < yv.numel(); ++i) gx[i] += gy[i] * yv[i] * (T(1) - yv[i]);
    });
  }
  return out;
}

inline constexpr double kDefaultLeakySlope = 0.1;

template <typename T>
Var<T> leaky_relu(Tape<T>& tape, const Var<T>& x, T slope = T(kDefaultLeakySlope)) {
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (int64_t i = 0; i < xv.numel(); ++i) y[i] = xv[i] >= T(0) ? xv[i] : slope * xv[i];
  Var<T> out = make_result(tape, std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record([x, out, slope]() mutable {
      const Tensor<T>& xv2 = x.value();
      const Tensor<T>& gy = out.grad();
      Tensor<T>& gx = x.grad();
      for (int64_t i = 0; i < xv2.numel(); ++i)
        gx[i] += gy[i] * (xv2[i] >= T(0) ? T(1) : slope);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise binary (identical shapes; no broadcasting)
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape("add", a, b);
  Tensor<T> y(a.shape());
  const Tensor<T>&av = a.value(), &bv = b.value();
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] + bv[i];
  Var<T> out = make_result(tape, std::move(y), a.requires_grad() || b.requires_grad());
  if (out.requires_grad()) {
    tape.record([a, b, out]() mutable {
      const Tensor<T>& gy = out.grad();
      if (a.requires_grad()) {
        Tensor<T>& ga = a.grad();
        for (int64_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        Tensor<T>& gb = b.grad();
        for (int64_t i = 0; i < gy.numel(); ++i) gb[i] += gy[i];
      }
    });
  }
  return out;
}

template <typename T>
Var<T> sub(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape("sub", a, b);
  Tensor<T> y(a.shape());
  const Tensor<T>&av = a.value(), &bv = b.value();
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] - bv[i];
  Var<T> out = make_result(tape, std::move(y), a.requires_grad() || b.requires_grad());
  if (out.requires_grad()) {
    tape.record([a, b, out]() mutable {
      const Tensor<T>& gy = out.grad();
      if (a.requires_grad()) {
        Tensor<T>& ga = a.grad();
        for (int64_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        Tensor<T>& gb = b.grad();
        for (int64_t i = 0; i < gy.numel(); ++i) gb[i] -= gy[i];
      }
    });
  }
  return out;
}

template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape("mul", a, b);
  Tensor<T> y(a.shape());
  const Tensor<T>&av = a.value(), &bv = b.value();
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] * bv[i];
  Var<T> out = make_result(tape, std::move(y), a.requires_grad() || b.requires_grad());
  if (out.requires_grad()) {
    tape.record([a, b, out]() mutable {
      const Tensor<T>& gy = out.grad();
      const Tensor<T>&av2 = a.value(), &bv2 = b.value();
      if (a.requires_grad()) {
        Tensor<T>& ga = a.grad();
        for (int64_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i] * bv2[i];
      }
      if (b.requires_grad()) {
        Tensor<T>& gb = b.grad();
        for (int64_t i = 0; i < gy.numel(); ++i) gb[i] += gy[i] * av2[i];
      }
    });
  }
  return out;
}

// Scalar-tensor broadcasting is allowed only for multiply/add by a scalar.

template <typename T>
Var<T> mul_scalar(Tape<T>& tape, const Var<T>& x, T s) {
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = xv[i] * s;
  Var<T> out = make_result(tape, std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record([x, out, s]() mutable {
      const Tensor<T>& gy = out.grad();
      Tensor<T>& gx = x.grad();
      for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i] * s;
    });
  }
  return out;
}

template <typename T>
Var<T> add_scalar(Tape<T>& tape, const Var<T>& x, T s) {
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = xv[i] + s;
  Var<T> out = make_result(tape, std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    tape.record([x, out]() mutable {
      const Tensor<T>& gy = out.grad();
      Tensor<T>& gx = x.grad();
      for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Channel concat / split
// ---------------------------------------------------------------------------

template <typename T>
Var<T> concat_channels(Tape<T>& tape, const std::vector<Var<T>>& xs) {
  require(!xs.empty(), "concat_channels: empty input list");
  const Shape& s0 = xs[0].shape();
  require(s0.rank() == 4, "concat_channels: rank-4 tensors required, got " + s0.str());
  int64_t channels = 0;
  bool any_grad = false;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (s.rank() != 4 || s.n() != s0.n() || s.h() != s0.h() || s.w() != s0.w())
      throw std::invalid_argument("concat_channels: batch/spatial mismatch " + s.str() +
                                  " vs " + s0.str());
    channels += s.c();
    any_grad = any_grad || x.requires_grad();
  }
  Tensor<T> y(Shape{s0.n(), channels, s0.h(), s0.w()});
  const int64_t plane = s0.h() * s0.w();
  for (int64_t n = 0; n < s0.n(); ++n) {
    int64_t co = 0;
    for (const auto& x : xs) {
      const Tensor<T>& xv = x.value();
      const int64_t c = x.shape().c();
      std::copy(xv.plane(n, 0), xv.plane(n, 0) + c * plane, y.plane(n, co));
      co += c;
    }
  }
  Var<T> out = make_result(tape, std::move(y), any_grad);
  if (out.requires_grad()) {
    tape.record([xs, out, plane]() mutable {
      const Tensor<T>& gy = out.grad();
      const int64_t batch = out.shape().n();
      for (int64_t n = 0; n < batch; ++n) {
        int64_t co = 0;
        for (auto& x : xs) {
          const int64_t c = x.shape().c();
          if (x.requires_grad()) {
            Tensor<T>& gx = x.grad();
            const T* src = gy.plane(n, co);
            T* dst = gx.plane(n, 0);
            for (int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
          }
          co += c;
        }
      }
    });
  }
  return out;
}

template <typename T>
std::vector<Var<T>> split_channels(Tape<T>& tape, const Var<T>& x,
                                   const std::vector<int64_t>& sizes) {
  const Shape& s = x.shape();
  require(s.rank() == 4, "split_channels: rank-4 tensor required, got " + s.str());
  int64_t total = 0;
  for (int64_t c : sizes) {
    require(c >= 1, "split_channels: sizes must be >= 1");
    total += c;
  }
  if (total != s.c())
    throw std::invalid_argument("split_channels: sizes sum " + std::to_string(total) +
                                " != channel extent " + std::to_string(s.c()));
  const int64_t plane = s.h() * s.w();
  std::vector<Var<T>> outs;
  outs.reserve(sizes.size());
  int64_t c0 = 0;
  for (int64_t c : sizes) {
    Tensor<T> y(Shape{s.n(), c, s.h(), s.w()});
    for (int64_t n = 0; n < s.n(); ++n)
      std::copy(x.value().plane(n, c0), x.value().plane(n, c0) + c * plane, y.plane(n, 0));
    Var<T> out = make_result(tape, std::move(y), x.requires_grad());
    if (out.requires_grad()) {
      tape.record([x, out, c0, c, plane]() mutable {
        const Tensor<T>& gy = out.grad();
        Tensor<T>& gx = x.grad();
        for (int64_t n = 0; n < gy.shape().n(); ++n) {
          const T* src = gy.plane(n, 0);
          T* dst = gx.plane(n, c0);
          for (int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
        }
      });
    }
    outs.push_back(std::move(out));
    c0 += c;
  }
  return outs;
}

/// Tiles a 2-channel flow field across G*9 deformable taps in (dy, dx)
/// channel order: output channel (g*9+k)*2 carries flow channel 1 (dy) and
/// (g*9+k)*2+1 carries flow channel 0 (dx).
template <typename T>
Var<T> tile_flow_offsets(Tape<T>& tape, const Var<T>& flow, int64_t groups) {
  const Shape& s = flow.shape();
  require(s.rank() == 4 && s.c() == 2,
          "tile_flow_offsets: flow must be (N,2,H,W), got " + s.str());
  require(groups >= 1, "tile_flow_offsets: groups must be >= 1");
  const int64_t plane = s.h() * s.w();
  Tensor<T> y(Shape{s.n(), groups * 18, s.h(), s.w()});
  for (int64_t n = 0; n < s.n(); ++n) {
    const T* dx = flow.value().plane(n, 0);
    const T* dy = flow.value().plane(n, 1);
    for (int64_t t = 0; t < groups * 9; ++t) {
      std::copy(dy, dy + plane, y.plane(n, 2 * t));
      std::copy(dx, dx + plane, y.plane(n, 2 * t + 1));
    }
  }
  Var<T> out = make_result(tape, std::move(y), flow.requires_grad());
  if (out.requires_grad()) {
    tape.record([flow, out, groups, plane]() mutable {
      const Tensor<T>& gy = out.grad();
      Tensor<T>& gf = flow.grad();
      for (int64_t n = 0; n < gy.shape().n(); ++n) {
        T* gdx = gf.plane(n, 0);
        T* gdy = gf.plane(n, 1);
        for (int64_t t = 0; t < groups * 9; ++t) {
          const T* gvy = gy.plane(n, 2 * t);
          const T* gvx = gy.plane(n, 2 * t + 1);
          for (int64_t i = 0; i < plane; ++i) {
            gdy[i] += gvy[i];
            gdx[i] += gvx[i];
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(Tape<T>& tape, const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  T acc = 0;
  for (int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
  Var<T> out = make_result(tape, Tensor<T>::scalar(acc), x.requires_grad());
  if (out.requires_grad()) {
    tape.record([x, out]() mutable {
      const T g = out.grad()[0];
      Tensor<T>& gx = x.grad();
      for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    });
  }
  return out;
}

template <typename T>
Var<T> mean_all(Tape<T>& tape, const Var<T>& x) {
  return mul_scalar(tape, sum_all(tape, x), T(1) / static_cast<T>(x.shape().numel()));
}

// ---------------------------------------------------------------------------
// Non-differentiable helpers
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> clamp01(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = std::min(T(1), std::max(T(0), x[i]));
  return y;
}

}  // namespace fgdfpn
