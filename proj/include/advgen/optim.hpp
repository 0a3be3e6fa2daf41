#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "advgen/tensor.hpp"

namespace advgen {

/// First/second moment buffers for Adam, one pair per parameter tensor.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

inline AdamState make_adam_state(const std::vector<Tensor*>& params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->shape);
    s.v.emplace_back(p->shape);
  }
  return s;
}

/// One Adam update with bias correction. Parameters, gradients and state
/// buffers must line up index-for-index.
inline void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                      AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  if (lr <= 0.0) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  state.step += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) throw std::invalid_argument("adam_step: gradient shape mismatch");
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

inline void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                     double lr) {
  if (lr <= 0.0) throw std::invalid_argument("sgd_step: learning rate must be positive");
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) throw std::invalid_argument("sgd_step: gradient shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
  }
}

/// Clip every parameter into [-c, c] (WGAN critic constraint).
inline void weight_clip(const std::vector<Tensor*>& params, double c) {
  if (c <= 0.0) throw std::invalid_argument("weight_clip: bound must be positive");
  for (Tensor* p : params)
    for (double& v : p->data) v = v < -c ? -c : (v > c ? c : v);
}

}  // namespace advgen
