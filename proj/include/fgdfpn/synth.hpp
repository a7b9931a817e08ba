#pragma once

// Synthetic motion clips: a band-limited random texture plus a few moving
// sprites, sampled from the continuous scene at t = 0..4 with bilinear
// interpolation. Stands in for dataset-scale training footage.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

struct MotionSpec {
  enum Kind { kTranslate, kAffine };
  Kind kind = kTranslate;
  double vx = 0, vy = 0;       // content displacement, pixels per frame
  double rotate = 0;           // radians per frame (affine only)
  double scale = 1.0;          // scale factor per frame (affine only)

  double speed() const { return std::hypot(vx, vy); }
};

struct Clip {
  std::vector<Tensor<float>> frames;  // 5 frames, shape (H, W), values in [0,1]
  MotionSpec motion;

  int64_t height() const { return frames.empty() ? 0 : frames[0].shape()[0]; }
  int64_t width() const { return frames.empty() ? 0 : frames[0].shape()[1]; }
};

namespace synth_detail {

/// Smoothed random texture: coarse noise grid upsampled bilinearly, two
/// octaves, values kept inside [lo, hi].
inline std::vector<float> band_limited_texture(Rng& rng, int64_t h, int64_t w) {
  std::vector<float> out(h * w, 0.f);
  double amplitude = 0.35;
  for (int64_t grid : {12 + int64_t(rng.below(6)), 5 + int64_t(rng.below(3))}) {
    const int64_t gh = h / grid + 2, gw = w / grid + 2;
    std::vector<float> coarse(gh * gw);
    for (auto& v : coarse) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (int64_t y = 0; y < h; ++y) {
      const double sy = static_cast<double>(y) / grid;
      const int64_t y0 = static_cast<int64_t>(sy);
      const float fy = static_cast<float>(sy - y0);
      for (int64_t x = 0; x < w; ++x) {
        const double sx = static_cast<double>(x) / grid;
        const int64_t x0 = static_cast<int64_t>(sx);
        const float fx = static_cast<float>(sx - x0);
        const float* c = coarse.data() + y0 * gw + x0;
        const float top = c[0] * (1 - fx) + c[1] * fx;
        const float bot = c[gw] * (1 - fx) + c[gw + 1] * fx;
        out[y * w + x] += static_cast<float>(amplitude) * (top * (1 - fy) + bot * fy);
      }
    }
    amplitude *= 0.5;
  }
  for (auto& v : out) v = std::clamp(0.5f + v, 0.08f, 0.92f);
  return out;
}

struct Sprite {
  bool ellipse = false;
  double cx = 0, cy = 0, rx = 8, ry = 8;
  float value = 0.5f;
};

/// Soft-edged coverage so the scene stays band-limited at sprite borders.
inline float sprite_coverage(const Sprite& s, double x, double y) {
  double d;
  if (s.ellipse) {
    const double q = std::hypot((x - s.cx) / s.rx, (y - s.cy) / s.ry);
    d = (1.0 - q) * std::min(s.rx, s.ry);
  } else {
    const double dx = s.rx - std::abs(x - s.cx);
    const double dy = s.ry - std::abs(y - s.cy);
    d = std::min(dx, dy);
  }
  return static_cast<float>(std::clamp(0.5 + d / 2.0, 0.0, 1.0));
}

}  // namespace synth_detail

/// Draws a motion within the speed budget. Translation components are
/// sampled uniformly with |v| <= max_speed; affine adds a slight rotation
/// and scaling about the frame center.
inline MotionSpec random_motion(Rng& rng, MotionSpec::Kind kind, double max_speed,
                                double min_speed = 0.0) {
  require(max_speed <= 8.0, "synth_clip: speeds above 8 px/frame are unsupported");
  MotionSpec m;
  m.kind = kind;
  const double speed = rng.uniform(min_speed, max_speed);
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  m.vx = speed * std::cos(angle);
  m.vy = speed * std::sin(angle);
  if (kind == MotionSpec::kAffine) {
    m.rotate = rng.uniform(-0.01, 0.01);
    m.scale = 1.0 + rng.uniform(-0.004, 0.004);
  }
  return m;
}

/// Renders 5 consecutive frames of a moving scene. The scene is static
/// content; frame t samples it through the motion map, so for pure
/// translation frame_{t+1}(p) == frame_t(p - v) away from the borders.
inline Clip synth_clip(Rng& rng, int64_t h, int64_t w, const MotionSpec& motion) {
  require(h >= 16 && w >= 16, "synth_clip: frames must be at least 16x16");
  require(motion.speed() <= 8.0, "synth_clip: speeds above 8 px/frame are unsupported");
  const int64_t margin =
      static_cast<int64_t>(std::ceil(4.0 * motion.speed() + 0.08 * std::max(h, w))) + 6;
  const int64_t sh = h + 2 * margin, sw = w + 2 * margin;

  std::vector<float> scene = synth_detail::band_limited_texture(rng, sh, sw);
  const int64_t sprite_count = 1 + static_cast<int64_t>(rng.below(3));
  for (int64_t i = 0; i < sprite_count; ++i) {
    synth_detail::Sprite s;
    s.ellipse = rng.below(2) == 1;
    s.cx = rng.uniform(margin * 0.5, sw - margin * 0.5);
    s.cy = rng.uniform(margin * 0.5, sh - margin * 0.5);
    const double lo = std::max<double>(6.0, h / 10.0), hi = h / 3.0;
    s.rx = rng.uniform(lo, hi);
    s.ry = s.ellipse ? rng.uniform(lo, hi) : s.rx * rng.uniform(0.5, 1.5);
    s.value = static_cast<float>(rng.uniform(0.1, 0.9));
    const int64_t y0 = std::max<int64_t>(0, int64_t(s.cy - s.ry - 2));
    const int64_t y1 = std::min(sh, int64_t(s.cy + s.ry + 3));
    const int64_t x0 = std::max<int64_t>(0, int64_t(s.cx - s.rx - 2));
    const int64_t x1 = std::min(sw, int64_t(s.cx + s.rx + 3));
    for (int64_t y = y0; y < y1; ++y)
      for (int64_t x = x0; x < x1; ++x) {
        const float cov = synth_detail::sprite_coverage(s, x, y);
        float& px = scene[y * sw + x];
        px = px * (1 - cov) + s.value * cov;
      }
  }

  const double cfy = (h - 1) / 2.0, cfx = (w - 1) / 2.0;
  const double csy = cfy + margin, csx = cfx + margin;
  Clip clip;
  clip.motion = motion;
  for (int64_t t = 0; t < 5; ++t) {
    const double dt = static_cast<double>(t) - 2.0;  // window centered at t=2
    const double theta = motion.kind == MotionSpec::kAffine ? motion.rotate * dt : 0.0;
    const double sigma = motion.kind == MotionSpec::kAffine ? std::pow(motion.scale, dt) : 1.0;
    const double ca = std::cos(theta) * sigma, sa = std::sin(theta) * sigma;
    Tensor<float> frame(Shape{h, w});
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const double rx = x - cfx, ry = y - cfy;
        const double sx = csx + ca * rx - sa * ry - dt * motion.vx;
        const double sy = csy + sa * rx + ca * ry - dt * motion.vy;
        const int64_t x0 = static_cast<int64_t>(std::floor(sx));
        const int64_t y0 = static_cast<int64_t>(std::floor(sy));
        const float fx = static_cast<float>(sx - x0), fy = static_cast<float>(sy - y0);
        const float* p = scene.data() + y0 * sw + x0;
        const float top = p[0] * (1 - fx) + p[1] * fx;
        const float bot = p[sw] * (1 - fx) + p[sw + 1] * fx;
        frame[y * w + x] = top * (1 - fy) + bot * fy;
      }
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

}  // namespace fgdfpn
