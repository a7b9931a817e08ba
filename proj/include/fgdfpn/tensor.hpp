#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(__GNUC__) || defined(__clang__)
#define FGDFPN_RESTRICT __restrict__
#else
#define FGDFPN_RESTRICT
#endif

namespace fgdfpn {

/// Dense shape, rank 0..4, layout (batch, channels, height, width) for rank-4
/// data with width fastest.
class Shape {
 public:
  static constexpr int kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<int64_t> dims) {
    if (dims.size() > kMaxRank) throw std::invalid_argument("Shape: rank > 4");
    for (int64_t d : dims) {
      if (d < 1) throw std::invalid_argument("Shape: extent < 1: " + str_of(dims));
      d_[rank_++] = d;
    }
  }

  int rank() const { return rank_; }
  int64_t operator[](int i) const { return d_[i]; }
  int64_t& operator[](int i) { return d_[i]; }

  int64_t numel() const {
    int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= d_[i];
    return n;
  }

  // rank-4 accessors
  int64_t n() const { return d_[0]; }
  int64_t c() const { return d_[1]; }
  int64_t h() const { return d_[2]; }
  int64_t w() const { return d_[3]; }

  bool operator==(const Shape& o) const {
    if (rank_ != o.rank_) return false;
    for (int i = 0; i < rank_; ++i)
      if (d_[i] != o.d_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < rank_; ++i) os << (i ? "," : "") << d_[i];
    os << ')';
    return os.str();
  }

 private:
  static std::string str_of(std::initializer_list<int64_t> dims) {
    std::ostringstream os;
    os << '(';
    bool first = true;
    for (int64_t d : dims) {
      os << (first ? "" : ",") << d;
      first = false;
    }
    os << ')';
    return os.str();
  }

  std::array<int64_t, kMaxRank> d_{1, 1, 1, 1};
  int rank_ = 0;
};

/// Contiguous row-major numeric array. T is float for training/inference and
/// double for gradient-check builds of the same kernels.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(const Shape& s) : shape_(s), data_(s.numel(), T(0)) {}

  Tensor(const Shape& s, std::vector<T> data) : shape_(s), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != shape_.numel())
      throw std::invalid_argument("Tensor: data size " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_.str());
  }

  static Tensor zeros(const Shape& s) { return Tensor(s); }

  static Tensor full(const Shape& s, T v) {
    Tensor t(s);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, {v}); }

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[i]; }
  const T& operator[](int64_t i) const { return data_[i]; }

  // rank-4 indexing, width fastest
  T& at(int64_t n, int64_t c, int64_t y, int64_t x) {
    return data_[((n * shape_.c() + c) * shape_.h() + y) * shape_.w() + x];
  }
  const T& at(int64_t n, int64_t c, int64_t y, int64_t x) const {
    return data_[((n * shape_.c() + c) * shape_.h() + y) * shape_.w() + x];
  }

  /// Pointer to the start of plane (n, c) for rank-4 tensors.
  T* plane(int64_t n, int64_t c) {
    return data_.data() + (n * shape_.c() + c) * shape_.h() * shape_.w();
  }
  const T* plane(int64_t n, int64_t c) const {
    return data_.data() + (n * shape_.c() + c) * shape_.h() * shape_.w();
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// xoshiro256++ with splitmix64 seeding. Self-contained so that trained runs
/// are reproducible bit-for-bit and the generator state can be checkpointed.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& si : s_) {
      // splitmix64 step
      x += 0x9E3779B97F4A7C15ull;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      si = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no cached spare, so state is just s_).
  double normal() {
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0x1.0p-60) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  std::array<uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> s_{};
};

template <typename T>
Tensor<T> random_uniform(Rng& rng, const Shape& s, double lo, double hi) {
  Tensor<T> t(s);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

}  // namespace fgdfpn
