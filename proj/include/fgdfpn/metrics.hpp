#pragma once

// PSNR and single-scale SSIM on 8-bit frames, plus error-map rendering.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fgdfpn/video_io.hpp"

namespace fgdfpn {

/// 10*log10(255^2 / MSE); +inf when the frames are identical.
inline double psnr(const Frame& a, const Frame& b) {
  if (a.w != b.w || a.h != b.h)
    throw std::invalid_argument("psnr: dimension mismatch " + std::to_string(a.w) + "x" +
                                std::to_string(a.h) + " vs " + std::to_string(b.w) + "x" +
                                std::to_string(b.h));
  double mse = 0;
  for (size_t i = 0; i < a.px.size(); ++i) {
    const double d = double(a.px[i]) - double(b.px[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.px.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace ssim_detail {

inline const std::vector<double>& gaussian11() {
  static const std::vector<double> kernel = [] {
    std::vector<double> k(11);
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
      const double d = i - 5;
      k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
  }();
  return kernel;
}

/// Separable 11x11 Gaussian filtering at valid positions only.
inline std::vector<double> filter_valid(const std::vector<double>& img, int64_t h, int64_t w) {
  const auto& k = gaussian11();
  const int64_t ow = w - 10, oh = h - 10;
  std::vector<double> tmp(h * ow), out(oh * ow);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < 11; ++i) s += k[i] * img[y * w + x + i];
      tmp[y * ow + x] = s;
    }
  for (int64_t y = 0; y < oh; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < 11; ++i) s += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace ssim_detail

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
/// L=255, mean over valid window positions.
inline double ssim(const Frame& a, const Frame& b) {
  if (a.w != b.w || a.h != b.h) throw std::invalid_argument("ssim: dimension mismatch");
  if (a.w < 11 || a.h < 11)
    throw std::invalid_argument("ssim: frames must be at least 11x11, got " +
                                std::to_string(a.w) + "x" + std::to_string(a.h));
  const int64_t n = a.w * a.h;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int64_t i = 0; i < n; ++i) {
    x[i] = a.px[i];
    y[i] = b.px[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  using ssim_detail::filter_valid;
  const auto mx = filter_valid(x, a.h, a.w);
  const auto my = filter_valid(y, a.h, a.w);
  const auto mxx = filter_valid(xx, a.h, a.w);
  const auto myy = filter_valid(yy, a.h, a.w);
  const auto mxy = filter_valid(xy, a.h, a.w);

  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double c2 = (0.03 * 255) * (0.03 * 255);
  double acc = 0;
  for (size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cxy = mxy[i] - mx[i] * my[i];
    acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}

struct ErrorMap {
  Frame map;
  double scale = 0;  // multiplier applied to |pred - gt|; 0 when frames match
};

/// Per-pixel absolute difference scaled so the largest error maps to 255.
inline ErrorMap error_map(const Frame& pred, const Frame& gt) {
  if (pred.w != gt.w || pred.h != gt.h)
    throw std::invalid_argument("error_map: dimension mismatch");
  ErrorMap em;
  em.map.w = pred.w;
  em.map.h = pred.h;
  em.map.px.resize(pred.px.size());
  int maxd = 0;
  for (size_t i = 0; i < pred.px.size(); ++i)
    maxd = std::max(maxd, std::abs(int(pred.px[i]) - int(gt.px[i])));
  if (maxd == 0) return em;
  em.scale = 255.0 / maxd;
  for (size_t i = 0; i < pred.px.size(); ++i) {
    const double v = std::abs(int(pred.px[i]) - int(gt.px[i])) * em.scale;
    em.map.px[i] = static_cast<uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
  }
  return em;
}

}  // namespace fgdfpn
