#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "wgad/network.hpp"
#include "wgad/tape.hpp"
#include "wgad/tensor.hpp"

namespace wgad {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment buffers are created lazily per parameter name.
template <class T>
struct AdamState {
  AdamHyper hyper;
  int64_t t = 0;
  std::map<std::string, Tensor<T>> m, v;
};

template <class T>
void adam_step(ParamStore<T>& params, const Gradient<T>& grads, AdamState<T>& state) {
  state.t += 1;
  const T lr = static_cast<T>(state.hyper.lr);
  const T b1 = static_cast<T>(state.hyper.beta1);
  const T b2 = static_cast<T>(state.hyper.beta2);
  const T eps = static_cast<T>(state.hyper.eps);
  const T c1 = T(1) - static_cast<T>(std::pow(state.hyper.beta1, static_cast<double>(state.t)));
  const T c2 = T(1) - static_cast<T>(std::pow(state.hyper.beta2, static_cast<double>(state.t)));
  for (const auto& [name, g] : grads) {
    Tensor<T>& theta = params.at(name);
    if (!theta.same_shape(g)) {
      throw AutodiffError("gradient shape " + g.shape_str() + " does not match parameter '" + name + "'");
    }
    auto mit = state.m.try_emplace(name, Tensor<T>(g.shape())).first;
    auto vit = state.v.try_emplace(name, Tensor<T>(g.shape())).first;
    Tensor<T>& m = mit->second;
    Tensor<T>& v = vit->second;
    for (int64_t i = 0; i < g.numel(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const T mhat = m[i] / c1;
      const T vhat = v[i] / c2;
      theta[i] -= lr * mhat / (static_cast<T>(std::sqrt(static_cast<double>(vhat))) + eps);
    }
  }
}

struct RmspropHyper {
  double lr = 5e-5;
  double decay = 0.9;
  double eps = 1e-8;  // added inside the square root
};

template <class T>
struct RmspropState {
  RmspropHyper hyper;
  int64_t t = 0;
  std::map<std::string, Tensor<T>> acc;
};

template <class T>
void rmsprop_step(ParamStore<T>& params, const Gradient<T>& grads, RmspropState<T>& state) {
  state.t += 1;
  const T lr = static_cast<T>(state.hyper.lr);
  const T d = static_cast<T>(state.hyper.decay);
  const T eps = static_cast<T>(state.hyper.eps);
  for (const auto& [name, g] : grads) {
    Tensor<T>& theta = params.at(name);
    if (!theta.same_shape(g)) {
      throw AutodiffError("gradient shape " + g.shape_str() + " does not match parameter '" + name + "'");
    }
    auto it = state.acc.try_emplace(name, Tensor<T>(g.shape())).first;
    Tensor<T>& acc = it->second;
    for (int64_t i = 0; i < g.numel(); ++i) {
      acc[i] = d * acc[i] + (T(1) - d) * g[i] * g[i];
      theta[i] -= lr * g[i] / static_cast<T>(std::sqrt(static_cast<double>(acc[i] + eps)));
    }
  }
}

// Clamp every weight and bias into [-c, c]; batch-norm running statistics are
// not weights and stay untouched.
template <class T>
void weight_clip(ParamStore<T>& params, double c) {
  if (c <= 0) throw ConfigError("clip bound must be positive");
  const T lo = static_cast<T>(-c), hi = static_cast<T>(c);
  for (auto& [name, t] : params.tensors) {
    if (is_running_stat(name)) continue;
    for (int64_t i = 0; i < t.numel(); ++i) {
      if (t[i] > hi) t[i] = hi;
      if (t[i] < lo) t[i] = lo;
    }
  }
}

}  // namespace wgad
