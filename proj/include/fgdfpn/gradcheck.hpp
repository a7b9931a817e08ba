#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "fgdfpn/conv.hpp"
#include "fgdfpn/deform.hpp"
#include "fgdfpn/loss.hpp"
#include "fgdfpn/ops.hpp"
#include "fgdfpn/sampling.hpp"
#include "fgdfpn/shuffle.hpp"
#include "fgdfpn/tape.hpp"

namespace fgdfpn {

// All checks run in double; central differences with the default step are
// good to ~1e-9 there, far below the 1e-4 gate.
inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTol = 1e-4;

struct GradCheckResult {
  double max_rel_err = 0.0;
  int64_t checks = 0;

  void fold(const GradCheckResult& o) {
    max_rel_err = std::max(max_rel_err, o.max_rel_err);
    checks += o.checks;
  }
};

/// Compares tape gradients of a scalar-valued graph against central finite
/// differences, element by element, for every leaf.
inline GradCheckResult check_gradients(
    const std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>& build,
    const std::vector<Tensor<double>>& leaves, double step = kGradCheckStep) {
  Tape<double> tape(true);
  std::vector<Var<double>> vars;
  vars.reserve(leaves.size());
  for (const auto& t : leaves) vars.push_back(tape.leaf(t, true));
  Var<double> loss = build(tape, vars);
  tape.backward(loss);

  auto eval = [&](size_t li, int64_t i, double delta) {
    Tape<double> t2(false);
    std::vector<Var<double>> vs;
    vs.reserve(leaves.size());
    for (size_t lj = 0; lj < leaves.size(); ++lj) {
      Tensor<double> v = leaves[lj];
      if (lj == li) v[i] += delta;
      vs.push_back(t2.leaf(std::move(v), false));
    }
    return build(t2, vs).value()[0];
  };

  GradCheckResult res;
  for (size_t li = 0; li < leaves.size(); ++li) {
    for (int64_t i = 0; i < leaves[li].numel(); ++i) {
      const double num = (eval(li, i, step) - eval(li, i, -step)) / (2.0 * step);
      const double ana = vars[li].grad()[i];
      const double denom = std::max({std::abs(ana), std::abs(num), 1e-2});
      res.max_rel_err = std::max(res.max_rel_err, std::abs(ana - num) / denom);
      ++res.checks;
    }
  }
  return res;
}

namespace detail {

/// Random values bounded away from the leaky_relu kink at zero.
inline Tensor<double> random_away_from_zero(Rng& rng, const Shape& s, double lo = 0.05,
                                            double hi = 1.0) {
  Tensor<double> t(s);
  for (int64_t i = 0; i < t.numel(); ++i) {
    const double mag = rng.uniform(lo, hi);
    t[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

/// Flow/offset values whose sample positions stay interior and fractional,
/// away from the bilinear kinks at integer coordinates and the border clamp.
inline Tensor<double> interior_flow(Rng& rng, int64_t n, int64_t channels, int64_t h, int64_t w,
                                    bool tap_relative, int64_t taps_margin = 0) {
  Tensor<double> t(Shape{n, channels, h, w});
  for (int64_t b = 0; b < n; ++b)
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
          const bool vertical = tap_relative ? (c % 2 == 0) : (c == 1);
          const int64_t pos = vertical ? y : x;
          const int64_t ext = vertical ? h : w;
          const int64_t lo = std::min<int64_t>(1 + taps_margin, ext - 2);
          const int64_t hi = std::max<int64_t>(ext - 2 - taps_margin, lo);
          int64_t cell = lo + static_cast<int64_t>(rng.below(hi - lo + 1));
          const double frac = rng.uniform(0.2, 0.8);
          t.at(b, c, y, x) = static_cast<double>(cell) + frac - static_cast<double>(pos);
        }
  return t;
}

}  // namespace detail

struct GradCheckCase {
  std::string name;
  std::function<GradCheckResult(Rng&)> run;
};

/// Registered differentiable operations, each checked on several random
/// shapes. Shared by the CLI self-verification command and the test suites.
inline std::vector<GradCheckCase> gradcheck_registry() {
  std::vector<GradCheckCase> cases;

  auto elementwise = [](const char* name, auto fn) {
    return GradCheckCase{
        name, [fn](Rng& rng) {
          GradCheckResult res;
          const Shape shapes[] = {{1, 1, 2, 3}, {2, 2, 3, 3}, {1, 4, 4, 4}, {3, 1, 2, 2},
                                  {2, 3, 4, 2}};
          for (const Shape& s : shapes) {
            Tensor<double> x = detail::random_away_from_zero(rng, s, 0.05, 1.5);
            Tensor<double> c = random_uniform<double>(rng, s, -1.0, 1.0);
            res.fold(check_gradients(
                [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                  return sum_all(t, mul(t, fn(t, v[0]), t.leaf(c)));
                },
                {x}));
          }
          return res;
        }};
  };
  cases.push_back(elementwise("tanh", [](Tape<double>& t, const Var<double>& x) {
    return fgdfpn::tanh(t, x);
  }));
  cases.push_back(elementwise("sigmoid", [](Tape<double>& t, const Var<double>& x) {
    return fgdfpn::sigmoid(t, x);
  }));
  cases.push_back(elementwise("leaky_relu", [](Tape<double>& t, const Var<double>& x) {
    return fgdfpn::leaky_relu(t, x, 0.1);
  }));

  cases.push_back({"elementwise_binary", [](Rng& rng) {
                     GradCheckResult res;
                     const Shape shapes[] = {{1, 1, 2, 2}, {2, 2, 3, 3}, {1, 3, 4, 4},
                                             {2, 1, 5, 2}, {1, 2, 2, 6}};
                     for (const Shape& s : shapes) {
                       Tensor<double> a = random_uniform<double>(rng, s, -1, 1);
                       Tensor<double> b = random_uniform<double>(rng, s, -1, 1);
                       Tensor<double> c = random_uniform<double>(rng, s, -1, 1);
                       res.fold(check_gradients(
                           [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                             Var<double> u = add(t, mul(t, v[0], v[1]), sub(t, v[0], v[1]));
                             return sum_all(t, mul(t, u, t.leaf(c)));
                           },
                           {a, b}));
                     }
                     return res;
                   }});

  cases.push_back({"concat_split", [](Rng& rng) {
                     GradCheckResult res;
                     for (int rep = 0; rep < 5; ++rep) {
                       const int64_t h = 2 + static_cast<int64_t>(rng.below(3));
                       const int64_t w = 2 + static_cast<int64_t>(rng.below(3));
                       Tensor<double> a = random_uniform<double>(rng, {1, 2, h, w}, -1, 1);
                       Tensor<double> b = random_uniform<double>(rng, {1, 3, h, w}, -1, 1);
                       Tensor<double> c = random_uniform<double>(rng, {1, 5, h, w}, -1, 1);
                       res.fold(check_gradients(
                           [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                             Var<double> cat = concat_channels(t, {v[0], v[1]});
                             auto parts = split_channels(t, cat, {1, 3, 1});
                             Var<double> mid = concat_channels(t, {parts[0], parts[1], parts[2]});
                             return sum_all(t, mul(t, mid, t.leaf(c)));
                           },
                           {a, b}));
                     }
                     return res;
                   }});

  cases.push_back({"conv2d", [](Rng& rng) {
                     GradCheckResult res;
                     struct Cfg {
                       int64_t cin, cout, h, w, k, stride, pad, groups;
                     };
                     const Cfg cfgs[] = {{2, 3, 5, 5, 3, 1, 1, 1}, {4, 4, 6, 6, 3, 2, 1, 2},
                                         {3, 2, 4, 7, 1, 1, 0, 1}, {2, 4, 8, 5, 3, 1, 0, 1},
                                         {4, 2, 6, 6, 3, 2, 0, 2}, {1, 3, 4, 4, 3, 1, 1, 1}};
                     for (const Cfg& c : cfgs) {
                       ConvSpec spec{c.cin, c.cout, c.k, c.k, c.stride, c.pad, c.groups};
                       Tensor<double> x = random_uniform<double>(rng, {2, c.cin, c.h, c.w}, -1, 1);
                       Tensor<double> w = random_uniform<double>(rng, spec.weight_shape(), -1, 1);
                       Tensor<double> b = random_uniform<double>(rng, spec.bias_shape(), -1, 1);
                       Shape os{2, c.cout, spec.out_extent(c.h), spec.out_extent(c.w)};
                       Tensor<double> cw = random_uniform<double>(rng, os, -1, 1);
                       res.fold(check_gradients(
                           [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                             return sum_all(
                                 t, mul(t, conv2d(t, v[0], spec, v[1], v[2]), t.leaf(cw)));
                           },
                           {x, w, b}));
                     }
                     return res;
                   }});

  cases.push_back({"bilinear_resize", [](Rng& rng) {
                     GradCheckResult res;
                     struct Cfg {
                       int64_t h, w, oh, ow;
                     };
                     const Cfg cfgs[] = {{4, 4, 8, 8}, {6, 6, 3, 3}, {5, 7, 7, 5},
                                         {4, 4, 4, 4}, {2, 8, 5, 3}};
                     for (const Cfg& c : cfgs) {
                       Tensor<double> x = random_uniform<double>(rng, {2, 2, c.h, c.w}, -1, 1);
                       Tensor<double> cw =
                           random_uniform<double>(rng, {2, 2, c.oh, c.ow}, -1, 1);
                       res.fold(check_gradients(
                           [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                             return sum_all(
                                 t, mul(t, bilinear_resize(t, v[0], c.oh, c.ow), t.leaf(cw)));
                           },
                           {x}));
                     }
                     return res;
                   }});

  cases.push_back({"flow_warp", [](Rng& rng) {
                     GradCheckResult res;
                     struct Cfg {
                       int64_t c, h, w;
                     };
                     const Cfg cfgs[] = {{1, 5, 5}, {2, 6, 4}, {3, 4, 6}, {2, 7, 7}, {1, 4, 4}};
                     for (const Cfg& c : cfgs) {
                       Tensor<double> f = random_uniform<double>(rng, {2, c.c, c.h, c.w}, -1, 1);
                       Tensor<double> flow = detail::interior_flow(rng, 2, 2, c.h, c.w, false);
                       Tensor<double> cw = random_uniform<double>(rng, {2, c.c, c.h, c.w}, -1, 1);
                       res.fold(check_gradients(
                           [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                             return sum_all(t, mul(t, flow_warp(t, v[0], v[1]), t.leaf(cw)));
                           },
                           {f, flow}));
                     }
                     return res;
                   }});

  cases.push_back({"deform_conv2d", [](Rng& rng) {
                     GradCheckResult res;
                     struct Cfg {
                       int64_t cin, cout, h, w, dg, groups;
                     };
                     const Cfg cfgs[] = {{2, 2, 5, 5, 1, 1}, {4, 2, 5, 5, 2, 1},
                                         {4, 4, 6, 5, 2, 2}, {2, 3, 6, 6, 2, 1},
                                         {3, 2, 5, 6, 1, 1}};
                     for (const Cfg& c : cfgs) {
                       ConvSpec spec{c.cin, c.cout, 3, 3, 1, 1, c.groups};
                       Tensor<double> x = random_uniform<double>(rng, {1, c.cin, c.h, c.w}, -1, 1);
                       Tensor<double> off =
                           detail::interior_flow(rng, 1, c.dg * 18, c.h, c.w, true, 1);
                       Tensor<double> mask =
                           random_uniform<double>(rng, {1, c.dg * 9, c.h, c.w}, 0.2, 0.9);
                       Tensor<double> w = random_uniform<double>(rng, spec.weight_shape(), -1, 1);
                       Tensor<double> b = random_uniform<double>(rng, spec.bias_shape(), -1, 1);
                       Tensor<double> cw =
                           random_uniform<double>(rng, {1, c.cout, c.h, c.w}, -1, 1);
                       res.fold(check_gradients(
                           [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                             return sum_all(
                                 t, mul(t,
                                        deform_conv2d(t, v[0], v[1], v[2], spec, c.dg, v[3],
                                                      v[4]),
                                        t.leaf(cw)));
                           },
                           {x, off, mask, w, b}));
                     }
                     return res;
                   }});

  cases.push_back({"pixel_shuffle", [](Rng& rng) {
                     GradCheckResult res;
                     struct Cfg {
                       int64_t c, h, w, r;
                     };
                     const Cfg cfgs[] = {{4, 3, 3, 2}, {8, 2, 3, 2}, {9, 2, 2, 3},
                                         {1, 4, 4, 1}, {12, 3, 2, 2}};
                     for (const Cfg& c : cfgs) {
                       Tensor<double> x = random_uniform<double>(rng, {2, c.c, c.h, c.w}, -1, 1);
                       Tensor<double> cw = random_uniform<double>(
                           rng, {2, c.c / (c.r * c.r), c.h * c.r, c.w * c.r}, -1, 1);
                       res.fold(check_gradients(
                           [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                             return sum_all(t, mul(t, pixel_shuffle(t, v[0], c.r), t.leaf(cw)));
                           },
                           {x}));
                     }
                     return res;
                   }});

  cases.push_back({"charbonnier_loss", [](Rng& rng) {
                     GradCheckResult res;
                     const Shape shapes[] = {{1, 1, 3, 3}, {2, 2, 2, 2}, {1, 4, 2, 3},
                                             {2, 1, 4, 4}, {1, 2, 5, 2}};
                     for (const Shape& s : shapes) {
                       Tensor<double> p = random_uniform<double>(rng, s, -1, 1);
                       Tensor<double> q = random_uniform<double>(rng, s, -1, 1);
                       res.fold(check_gradients(
                           [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                             return charbonnier_loss(t, v[0], v[1], 1e-3);
                           },
                           {p, q}));
                     }
                     // smooth at pred == target as well
                     Tensor<double> p = random_uniform<double>(rng, {1, 1, 3, 3}, -1, 1);
                     res.fold(check_gradients(
                         [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                           return charbonnier_loss(t, v[0], v[1], 1e-3);
                         },
                         {p, p}));
                     return res;
                   }});

  // a full composition across kernels exercises tape ordering end to end
  cases.push_back({"composition", [](Rng& rng) {
                     GradCheckResult res;
                     for (int rep = 0; rep < 5; ++rep) {
                       const int64_t h = 6, w = 6;
                       ConvSpec spec{2, 4, 3, 3, 1, 1, 1};
                       Tensor<double> x = random_uniform<double>(rng, {1, 2, h, w}, -1, 1);
                       Tensor<double> cw = random_uniform<double>(rng, spec.weight_shape(), -0.5,
                                                                  0.5);
                       Tensor<double> cb = random_uniform<double>(rng, spec.bias_shape(), -0.5,
                                                                  0.5);
                       Tensor<double> flow = detail::interior_flow(rng, 1, 2, h, w, false);
                       Tensor<double> tgt = random_uniform<double>(rng, {1, 1, 2 * h, 2 * w},
                                                                   -1, 1);
                       res.fold(check_gradients(
                           [&](Tape<double>& t, const std::vector<Var<double>>& v) {
                             Var<double> y = conv2d(t, v[0], spec, v[1], v[2]);
                             y = fgdfpn::tanh(t, y);
                             auto parts = split_channels(t, y, {2, 2});
                             Var<double> warped = flow_warp(t, parts[0], v[3]);
                             Var<double> cat = concat_channels(t, {warped, parts[1]});
                             Var<double> up = pixel_shuffle(t, cat, 2);
                             return charbonnier_loss(t, up, t.leaf(tgt), 1e-3);
                           },
                           {x, cw, cb, flow}));
                     }
                     return res;
                   }});

  return cases;
}

}  // namespace fgdfpn
