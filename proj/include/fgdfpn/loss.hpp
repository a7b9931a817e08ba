#pragma once

#include <cmath>

#include "fgdfpn/tape.hpp"
#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

/// Charbonnier penalty: mean over elements of sqrt((pred - target)^2 + eps^2).
/// Smooth everywhere, including pred == target (eps > 0).
template <typename T>
Var<T> charbonnier_loss(Tape<T>& tape, const Var<T>& pred, const Var<T>& target, T eps) {
  require(eps > T(0), "charbonnier_loss: eps must be > 0");
  if (pred.shape() != target.shape())
    throw std::invalid_argument("charbonnier_loss: shape mismatch " + pred.shape().str() +
                                " vs " + target.shape().str());
  const Tensor<T>&pv = pred.value(), &tv = target.value();
  const int64_t n = pv.numel();
  T acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    const T d = pv[i] - tv[i];
    acc += std::sqrt(d * d + eps * eps);
  }
  Var<T> out = make_result(tape, Tensor<T>::scalar(acc / static_cast<T>(n)),
                           pred.requires_grad() || target.requires_grad());
  if (out.requires_grad()) {
    tape.record([pred, target, out, eps, n]() mutable {
      const T g = out.grad()[0] / static_cast<T>(n);
      const Tensor<T>&pv2 = pred.value(), &tv2 = target.value();
      for (int64_t i = 0; i < n; ++i) {
        const T d = pv2[i] - tv2[i];
        const T gi = g * d / std::sqrt(d * d + eps * eps);
        if (pred.requires_grad()) pred.grad()[i] += gi;
        if (target.requires_grad()) target.grad()[i] -= gi;
      }
    });
  }
  return out;
}

}  // namespace fgdfpn
