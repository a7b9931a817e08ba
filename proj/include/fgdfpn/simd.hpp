#pragma once

// Register-blocked float kernels built on GNU vector extensions. These back
// the float instantiations of the hot kernels; the templated generic loops
// remain the reference path (and the only path for double).

#include <cstdint>
#include <cstring>
#include <vector>

#include "fgdfpn/tensor.hpp"

#if defined(__GNUC__) || defined(__clang__)
#define FGDFPN_SIMD 1
#endif

namespace fgdfpn {
namespace simd {

#if FGDFPN_SIMD

constexpr int64_t kLanes = 16;  // one AVX-512 register; GCC splits for narrower ISAs
typedef float vf __attribute__((vector_size(kLanes * sizeof(float))));
typedef float vf8 __attribute__((vector_size(8 * sizeof(float))));
// unaligned views; GNU vector types may alias their element type
typedef float vfu __attribute__((vector_size(kLanes * sizeof(float)), aligned(4)));
typedef float vf8u __attribute__((vector_size(8 * sizeof(float)), aligned(4)));

inline vf load(const float* p) { return reinterpret_cast<const vfu*>(p)[0]; }
inline void store(float* p, vf v) { reinterpret_cast<vfu*>(p)[0] = v; }
inline vf splat(float x) { return vf{} + x; }

inline vf8 load8(const float* p) { return reinterpret_cast<const vf8u*>(p)[0]; }
inline void store8(float* p, vf8 v) { reinterpret_cast<vf8u*>(p)[0] = v; }
inline vf8 splat8(float x) { return vf8{} + x; }
inline float hsum8(vf8 v) {
  float s = 0;
  for (int i = 0; i < 8; ++i) s += v[i];
  return s;
}

/// Zero-padded, per-plane packed copy of one batch element. Row pitch leaves
/// kLanes of zero slack so unaligned vector loads never read garbage.
struct PaddedPlanes {
  int64_t channels = 0, rows = 0, width = 0;  // padded logical extents
  int64_t pitch = 0;
  std::vector<float> buf;

  void pack(const Tensor<float>& x, int64_t n, int64_t pad) {
    const int64_t C = x.shape().c(), H = x.shape().h(), W = x.shape().w();
    channels = C;
    rows = H + 2 * pad;
    width = W + 2 * pad;
    pitch = width + kLanes;
    buf.assign(channels * rows * pitch, 0.f);
    for (int64_t c = 0; c < C; ++c) {
      const float* src = x.plane(n, c);
      float* dst = buf.data() + (c * rows + pad) * pitch + pad;
      for (int64_t y = 0; y < H; ++y)
        std::memcpy(dst + y * pitch, src + y * W, W * sizeof(float));
    }
  }

  const float* row(int64_t c, int64_t y) const { return buf.data() + (c * rows + y) * pitch; }
};

/// Even/odd column split of padded planes; turns stride-2 taps into
/// contiguous row accesses.
struct SplitPlanes {
  int64_t channels = 0, rows = 0, half = 0;
  int64_t pitch = 0;
  std::vector<float> buf;  // per (c, y): even row then odd row

  void pack(const PaddedPlanes& p) {
    channels = p.channels;
    rows = p.rows;
    half = p.width / 2 + 1;
    pitch = half + kLanes;
    buf.assign(channels * rows * 2 * pitch, 0.f);
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t y = 0; y < rows; ++y) {
        const float* src = p.row(c, y);
        float* ev = even(c, y);
        float* od = odd(c, y);
        for (int64_t i = 0; i < (p.width + 1) / 2; ++i) ev[i] = src[2 * i];
        for (int64_t i = 0; i < p.width / 2; ++i) od[i] = src[2 * i + 1];
      }
  }

  float* even(int64_t c, int64_t y) { return buf.data() + ((c * rows + y) * 2 + 0) * pitch; }
  float* odd(int64_t c, int64_t y) { return buf.data() + ((c * rows + y) * 2 + 1) * pitch; }
  const float* even(int64_t c, int64_t y) const {
    return buf.data() + ((c * rows + y) * 2 + 0) * pitch;
  }
  const float* odd(int64_t c, int64_t y) const {
    return buf.data() + ((c * rows + y) * 2 + 1) * pitch;
  }
};

// ---------------------------------------------------------------------------
// 3x3 row microkernel. rows9 holds, per input channel, nine row pointers
// already offset so tap t reads rows9[ci*9+t][ox]. Accumulators stay in
// registers across the whole (ci, tap) reduction.
// ---------------------------------------------------------------------------

template <int kVecs>
inline void conv9_block(float* FGDFPN_RESTRICT out, int64_t ox0, float bias,
                        const float* const* rows9, const float* w9, int64_t cin,
                        int64_t wstride) {
  vf acc[kVecs];
  for (int v = 0; v < kVecs; ++v) acc[v] = splat(bias);
  for (int64_t ci = 0; ci < cin; ++ci) {
    const float* const* r = rows9 + ci * 9;
    const float* w = w9 + ci * wstride;
    for (int v = 0; v < kVecs; ++v) {
      const int64_t o = ox0 + v * kLanes;
      vf a = splat(w[0]) * load(r[0] + o);
      a += splat(w[1]) * load(r[1] + o);
      a += splat(w[2]) * load(r[2] + o);
      a += splat(w[3]) * load(r[3] + o);
      a += splat(w[4]) * load(r[4] + o);
      a += splat(w[5]) * load(r[5] + o);
      a += splat(w[6]) * load(r[6] + o);
      a += splat(w[7]) * load(r[7] + o);
      a += splat(w[8]) * load(r[8] + o);
      acc[v] += a;
    }
  }
  for (int v = 0; v < kVecs; ++v) store(out + ox0 + v * kLanes, acc[v]);
}

/// Two output channels per pass: every loaded input vector feeds two FMAs.
template <int kVecs>
inline void conv9_block2(float* FGDFPN_RESTRICT o0, float* FGDFPN_RESTRICT o1, int64_t ox0,
                         float b0, float b1, const float* const* rows9, const float* w0,
                         const float* w1, int64_t cin, int64_t wstride) {
  vf a0[kVecs], a1[kVecs];
  for (int v = 0; v < kVecs; ++v) {
    a0[v] = splat(b0);
    a1[v] = splat(b1);
  }
  for (int64_t ci = 0; ci < cin; ++ci) {
    const float* const* r = rows9 + ci * 9;
    const float* wa = w0 + ci * wstride;
    const float* wb = w1 + ci * wstride;
    for (int v = 0; v < kVecs; ++v) {
      const int64_t o = ox0 + v * kLanes;
      for (int t = 0; t < 9; ++t) {
        const vf x = load(r[t] + o);
        a0[v] += splat(wa[t]) * x;
        a1[v] += splat(wb[t]) * x;
      }
    }
  }
  for (int v = 0; v < kVecs; ++v) {
    store(o0 + ox0 + v * kLanes, a0[v]);
    store(o1 + ox0 + v * kLanes, a1[v]);
  }
}

inline void conv9_row(float* FGDFPN_RESTRICT out, float bias, const float* const* rows9,
                      const float* w9, int64_t cin, int64_t wstride, int64_t ow) {
  int64_t ox = 0;
  for (; ox + 4 * kLanes <= ow; ox += 4 * kLanes)
    conv9_block<4>(out, ox, bias, rows9, w9, cin, wstride);
  for (; ox + kLanes <= ow; ox += kLanes) conv9_block<1>(out, ox, bias, rows9, w9, cin, wstride);
  for (; ox < ow; ++ox) {
    float acc = bias;
    for (int64_t ci = 0; ci < cin; ++ci) {
      const float* const* r = rows9 + ci * 9;
      const float* w = w9 + ci * wstride;
      for (int t = 0; t < 9; ++t) acc += w[t] * r[t][ox];
    }
    out[ox] = acc;
  }
}

inline void conv9_two_rows(float* o0, float* o1, float b0, float b1, const float* const* rows9,
                           const float* w0, const float* w1, int64_t cin, int64_t wstride,
                           int64_t ow) {
  int64_t ox = 0;
  for (; ox + 2 * kLanes <= ow; ox += 2 * kLanes)
    conv9_block2<2>(o0, o1, ox, b0, b1, rows9, w0, w1, cin, wstride);
  for (; ox + kLanes <= ow; ox += kLanes)
    conv9_block2<1>(o0, o1, ox, b0, b1, rows9, w0, w1, cin, wstride);
  for (; ox < ow; ++ox) {
    float acc0 = b0, acc1 = b1;
    for (int64_t ci = 0; ci < cin; ++ci) {
      const float* const* r = rows9 + ci * 9;
      const float* wa = w0 + ci * wstride;
      const float* wb = w1 + ci * wstride;
      for (int t = 0; t < 9; ++t) {
        acc0 += wa[t] * r[t][ox];
        acc1 += wb[t] * r[t][ox];
      }
    }
    o0[ox] = acc0;
    o1[ox] = acc1;
  }
}

// ---------------------------------------------------------------------------
// GEMM-style microkernel: two output rows += W * src rows, four vector
// chunks in registers. Serves 1x1 convolutions and per-tap deformable MACs.
// ---------------------------------------------------------------------------

template <int kVecs>
inline void gemm_rows_block(float* FGDFPN_RESTRICT o0, float* FGDFPN_RESTRICT o1, int64_t ox0,
                            float b0, float b1, const float* src, int64_t spitch,
                            const float* w0, const float* w1, int64_t cin, int64_t wstep,
                            bool accumulate) {
  vf a0[kVecs], a1[kVecs];
  for (int v = 0; v < kVecs; ++v) {
    a0[v] = accumulate ? load(o0 + ox0 + v * kLanes) : splat(b0);
    a1[v] = accumulate ? load(o1 + ox0 + v * kLanes) : splat(b1);
  }
  for (int64_t ci = 0; ci < cin; ++ci) {
    const float* s = src + ci * spitch + ox0;
    const vf wv0 = splat(w0[ci * wstep]);
    const vf wv1 = splat(w1[ci * wstep]);
    for (int v = 0; v < kVecs; ++v) {
      const vf x = load(s + v * kLanes);
      a0[v] += wv0 * x;
      a1[v] += wv1 * x;
    }
  }
  for (int v = 0; v < kVecs; ++v) {
    store(o0 + ox0 + v * kLanes, a0[v]);
    store(o1 + ox0 + v * kLanes, a1[v]);
  }
}

inline void gemm_two_rows(float* o0, float* o1, float b0, float b1, const float* src,
                          int64_t spitch, const float* w0, const float* w1, int64_t cin,
                          int64_t wstep, int64_t ow, bool accumulate) {
  int64_t ox = 0;
  for (; ox + 4 * kLanes <= ow; ox += 4 * kLanes)
    gemm_rows_block<4>(o0, o1, ox, b0, b1, src, spitch, w0, w1, cin, wstep, accumulate);
  for (; ox + kLanes <= ow; ox += kLanes)
    gemm_rows_block<1>(o0, o1, ox, b0, b1, src, spitch, w0, w1, cin, wstep, accumulate);
  for (; ox < ow; ++ox) {
    float acc0 = accumulate ? o0[ox] : b0;
    float acc1 = accumulate ? o1[ox] : b1;
    for (int64_t ci = 0; ci < cin; ++ci) {
      acc0 += w0[ci * wstep] * src[ci * spitch + ox];
      acc1 += w1[ci * wstep] * src[ci * spitch + ox];
    }
    o0[ox] = acc0;
    o1[ox] = acc1;
  }
}

inline void gemm_one_row(float* o0, float b0, const float* src, int64_t spitch, const float* w0,
                         int64_t cin, int64_t wstep, int64_t ow, bool accumulate) {
  int64_t ox = 0;
  for (; ox + kLanes <= ow; ox += kLanes) {
    vf a = accumulate ? load(o0 + ox) : splat(b0);
    for (int64_t ci = 0; ci < cin; ++ci) a += splat(w0[ci * wstep]) * load(src + ci * spitch + ox);
    store(o0 + ox, a);
  }
  for (; ox < ow; ++ox) {
    float acc = accumulate ? o0[ox] : b0;
    for (int64_t ci = 0; ci < cin; ++ci) acc += w0[ci * wstep] * src[ci * spitch + ox];
    o0[ox] = acc;
  }
}

/// Nine running tap dot-products of gy against pre-offset source rows.
inline void dot9_rows(const float* FGDFPN_RESTRICT gy, const float* const* rows9, int64_t ow,
                      float* FGDFPN_RESTRICT acc9) {
  vf acc[9];
  for (int t = 0; t < 9; ++t) acc[t] = splat(0.f);
  int64_t ox = 0;
  for (; ox + kLanes <= ow; ox += kLanes) {
    const vf g = load(gy + ox);
    for (int t = 0; t < 9; ++t) acc[t] += g * load(rows9[t] + ox);
  }
  float tail[9] = {0};
  for (; ox < ow; ++ox)
    for (int t = 0; t < 9; ++t) tail[t] += gy[ox] * rows9[t][ox];
  for (int t = 0; t < 9; ++t) {
    float s = tail[t];
    for (int64_t l = 0; l < kLanes; ++l) s += acc[t][l];
    acc9[t] += s;
  }
}

inline float dot_row(const float* FGDFPN_RESTRICT a, const float* FGDFPN_RESTRICT b, int64_t n) {
  vf acc = splat(0.f);
  int64_t i = 0;
  for (; i + kLanes <= n; i += kLanes) acc += load(a + i) * load(b + i);
  float s = 0;
  for (; i < n; ++i) s += a[i] * b[i];
  for (int64_t l = 0; l < kLanes; ++l) s += acc[l];
  return s;
}

inline void axpy_row(float* FGDFPN_RESTRICT dst, const float* FGDFPN_RESTRICT src, float w,
                     int64_t n) {
  const vf wv = splat(w);
  int64_t i = 0;
  for (; i + kLanes <= n; i += kLanes) store(dst + i, load(dst + i) + wv * load(src + i));
  for (; i < n; ++i) dst[i] += w * src[i];
}

inline float sum_row(const float* FGDFPN_RESTRICT a, int64_t n) {
  vf acc = splat(0.f);
  int64_t i = 0;
  for (; i + kLanes <= n; i += kLanes) acc += load(a + i);
  float s = 0;
  for (; i < n; ++i) s += a[i];
  for (int64_t l = 0; l < kLanes; ++l) s += acc[l];
  return s;
}

#endif  // FGDFPN_SIMD

}  // namespace simd
}  // namespace fgdfpn
