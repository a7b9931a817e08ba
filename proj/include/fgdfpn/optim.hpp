#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fgdfpn/checkpoint.hpp"
#include "fgdfpn/tape.hpp"
#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

struct TrainConfig {
  int64_t batch_size = 8;
  int64_t crop = 96;
  int64_t total_iters = 3000;     // paper-scale value: 500000
  double lr0 = 1e-4;
  int64_t halving_period = 0;     // 0 scales proportionally: total_iters / 5
  double charbonnier_eps = 1e-6;
  uint64_t seed = 1;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double clip_grad_norm = 0.0;    // 0 = off
  int64_t checkpoint_every = 500;

  void validate() const {
    require(lr0 > 0, "TrainConfig: lr0 must be > 0");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(crop >= 4 && crop % 4 == 0, "TrainConfig: crop must be a positive multiple of 4");
    require(total_iters >= 0, "TrainConfig: total_iters must be >= 0");
    require(charbonnier_eps > 0, "TrainConfig: charbonnier_eps must be > 0");
  }

  int64_t effective_halving_period() const {
    if (halving_period > 0) return halving_period;
    return std::max<int64_t>(1, total_iters / 5);
  }
};

/// lr = lr0 * 0.5^floor(iter / halving_period)
inline double lr_schedule(int64_t iter, const TrainConfig& cfg) {
  const int64_t halvings = iter / cfg.effective_halving_period();
  return cfg.lr0 * std::ldexp(1.0, -static_cast<int>(halvings));
}

/// Bias-corrected Adam. Moments live per parameter, in parameter order;
/// step() applies the update in place and then zeroes the gradients.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Parameter<T>*>& params, double lr) {
    ensure_state(params);
    for (Parameter<T>* p : params)
      for (int64_t i = 0; i < p->grad().numel(); ++i)
        if (!std::isfinite(static_cast<double>(p->grad()[i])))
          throw std::runtime_error("adam_step: non-finite gradient in parameter '" + p->name +
                                   "'");
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (size_t pi = 0; pi < params.size(); ++pi) {
      Parameter<T>* p = params[pi];
      Tensor<T>& m = m_[pi];
      Tensor<T>& v = v_[pi];
      Tensor<T>& g = p->grad();
      Tensor<T>& x = p->value();
      for (int64_t i = 0; i < g.numel(); ++i) {
        m[i] = static_cast<T>(beta1_ * m[i] + (1.0 - beta1_) * g[i]);
        v[i] = static_cast<T>(beta2_ * v[i] + (1.0 - beta2_) * double(g[i]) * double(g[i]));
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        x[i] = static_cast<T>(x[i] - lr * mhat / (std::sqrt(vhat) + eps_));
      }
      g.fill(T(0));
    }
  }

  int64_t steps() const { return step_; }

  /// Global-norm gradient clip; returns the pre-clip norm.
  static double clip_global_norm(const std::vector<Parameter<T>*>& params, double max_norm) {
    double sq = 0;
    for (Parameter<T>* p : params)
      for (int64_t i = 0; i < p->grad().numel(); ++i)
        sq += double(p->grad()[i]) * double(p->grad()[i]);
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
      const T s = static_cast<T>(max_norm / norm);
      for (Parameter<T>* p : params)
        for (int64_t i = 0; i < p->grad().numel(); ++i) p->grad()[i] *= s;
    }
    return norm;
  }

  void save(CheckpointWriter& w, const std::vector<Parameter<T>*>& params) {
    ensure_state(params);
    w.add("opt/step", Tensor<double>::scalar(static_cast<double>(step_)));
    for (size_t pi = 0; pi < params.size(); ++pi) {
      w.add("opt/m/" + params[pi]->name, m_[pi]);
      w.add("opt/v/" + params[pi]->name, v_[pi]);
    }
  }

  void load(const CheckpointReader& r, const std::vector<Parameter<T>*>& params) {
    step_ = static_cast<int64_t>(r.tensor<double>("opt/step")[0]);
    m_.clear();
    v_.clear();
    for (Parameter<T>* p : params) {
      Tensor<T> m = r.template tensor<T>("opt/m/" + p->name);
      Tensor<T> v = r.template tensor<T>("opt/v/" + p->name);
      if (m.shape() != p->value().shape() || v.shape() != p->value().shape())
        throw CheckpointError("checkpoint: optimizer state shape mismatch for '" + p->name +
                              "'");
      m_.push_back(std::move(m));
      v_.push_back(std::move(v));
    }
  }

 private:
  void ensure_state(const std::vector<Parameter<T>*>& params) {
    if (m_.size() == params.size()) return;
    require(m_.empty(), "Adam: parameter set changed mid-run");
    for (Parameter<T>* p : params) {
      m_.emplace_back(p->value().shape());
      v_.emplace_back(p->value().shape());
    }
  }

  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t step_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace fgdfpn
