#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wgad/rng.hpp"
#include "wgad/tape.hpp"
#include "wgad/tensor.hpp"

namespace wgad {

enum class Act : uint8_t { identity, tanh_fn, sigmoid_fn, relu, leaky_relu };

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kBnEps = 1e-8;
inline constexpr double kBnMomentum = 0.99;

inline std::string act_name(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::tanh_fn: return "tanh";
    case Act::sigmoid_fn: return "sigmoid";
    case Act::relu: return "relu";
    case Act::leaky_relu: return "leaky_relu";
  }
  return "?";
}

inline Act act_from_name(const std::string& s) {
  if (s == "identity") return Act::identity;
  if (s == "tanh") return Act::tanh_fn;
  if (s == "sigmoid") return Act::sigmoid_fn;
  if (s == "relu") return Act::relu;
  if (s == "leaky_relu") return Act::leaky_relu;
  throw ConfigError("unknown activation '" + s + "' (identity|tanh|sigmoid|relu|leaky_relu)");
}

struct LayerSpec {
  int64_t in = 0, out = 0;
  Act act = Act::leaky_relu;
  bool batch_norm = false;
};

// Dense feed-forward architecture. Each layer is affine -> optional batch
// norm -> activation; the last layer uses output_act in place of its listed
// activation. An encoder ends in a batch-normalized identity layer so latent
// codes come out approximately zero-mean unit-variance.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  Act output_act = Act::identity;

  void validate() const {
    if (layers.empty()) throw ConfigError("network needs at least one layer");
    for (size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].in < 1 || layers[i].out < 1) throw ConfigError("layer widths must be >= 1");
      if (i > 0 && layers[i - 1].out != layers[i].in) {
        throw ConfigError("consecutive layer widths disagree at layer " + std::to_string(i));
      }
    }
  }

  int64_t input_width() const { return layers.front().in; }
  int64_t output_width() const { return layers.back().out; }

  static NetworkSpec dense(const std::vector<int64_t>& widths, Act hidden_act, Act out_act,
                           bool hidden_bn = false, bool terminal_bn = false) {
    if (widths.size() < 2) throw ConfigError("dense network needs at least 2 widths");
    NetworkSpec spec;
    for (size_t i = 0; i + 1 < widths.size(); ++i) {
      LayerSpec l;
      l.in = widths[i];
      l.out = widths[i + 1];
      const bool last = (i + 2 == widths.size());
      l.act = last ? out_act : hidden_act;
      l.batch_norm = last ? terminal_bn : hidden_bn;
      spec.layers.push_back(l);
    }
    spec.output_act = out_act;
    spec.validate();
    return spec;
  }
};

// Named trainable arrays plus batch-norm running statistics. The map keeps
// names sorted, which fixes checkpoint and gradient iteration order.
template <class T>
struct ParamStore {
  std::map<std::string, Tensor<T>> tensors;

  Tensor<T>& at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
  }

  bool equals(const ParamStore& other) const {
    if (tensors.size() != other.tensors.size()) return false;
    auto a = tensors.begin();
    auto b = other.tensors.begin();
    for (; a != tensors.end(); ++a, ++b) {
      if (a->first != b->first || !a->second.same_shape(b->second)) return false;
      for (int64_t i = 0; i < a->second.numel(); ++i) {
        if (a->second[i] != b->second[i]) return false;
      }
    }
    return true;
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, t] : tensors) out.tensors.emplace(name, t.template cast<U>());
    return out;
  }
};

inline std::string layer_param(size_t layer, const char* which) {
  return "L" + std::to_string(layer) + "." + which;
}

// Running statistics are carried by the store but never optimized.
inline bool is_running_stat(const std::string& name) {
  auto ends_with = [&](const char* suffix) {
    std::string s(suffix);
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends_with(".bn_mean") || ends_with(".bn_var");
}

// Glorot-uniform weights, zero biases, unit batch-norm scale / zero shift.
template <class T>
ParamStore<T> init_params(const NetworkSpec& spec, RngStream& rng) {
  spec.validate();
  ParamStore<T> store;
  for (size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    Tensor<T> W(l.in, l.out);
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    rng.fill_uniform(W, -limit, limit);
    store.tensors.emplace(layer_param(li, "W"), std::move(W));
    store.tensors.emplace(layer_param(li, "b"), Tensor<T>(1, l.out));
    if (l.batch_norm) {
      store.tensors.emplace(layer_param(li, "bn_gamma"), Tensor<T>::full(1, l.out, T(1)));
      store.tensors.emplace(layer_param(li, "bn_beta"), Tensor<T>(1, l.out));
      store.tensors.emplace(layer_param(li, "bn_mean"), Tensor<T>(1, l.out));
      store.tensors.emplace(layer_param(li, "bn_var"), Tensor<T>::full(1, l.out, T(1)));
    }
  }
  return store;
}

template <class T>
ParamStore<T> init_params(const NetworkSpec& spec, uint64_t seed) {
  RngStream rng(seed);
  return init_params<T>(spec, rng);
}

enum class Mode : uint8_t { train, infer };

template <class T>
struct BoundForward {
  int output = -1;       // node id of the network output
  int last_hidden = -1;  // activations feeding the final affine layer
};

// One binding per (tape, store) pair: repeated forwards of the same network
// on one tape (critic on real, fake, and interpolated batches) must reuse the
// same parameter leaves, or gradient contributions would be split across
// duplicate leaves.
struct TapeBinding {
  std::map<std::string, int> leaf_of;
};

// Builds the network forward pass on the tape. With trainable=true the
// store's arrays become parameter leaves (running stats always bind as
// constants); otherwise everything binds as constants. In train mode batch
// norm uses minibatch statistics and folds them into the store's running
// statistics with momentum kBnMomentum; in infer mode it reads the running
// statistics, so the pass is a pure function of (params, batch).
template <class T>
BoundForward<T> forward_on_tape(Tape<T>& tape, const NetworkSpec& spec, ParamStore<T>& store,
                                int x_node, Mode mode, bool trainable, TapeBinding& binding) {
  spec.validate();
  const int64_t n = tape.value(x_node).rows();
  if (tape.value(x_node).cols() != spec.input_width()) {
    throw ConfigError("batch width " + std::to_string(tape.value(x_node).cols()) +
                      " does not match network input width " + std::to_string(spec.input_width()));
  }
  auto bind = [&](const std::string& name) {
    auto it = binding.leaf_of.find(name);
    if (it != binding.leaf_of.end()) return it->second;
    const Tensor<T>& t = store.at(name);
    int id = (trainable && !is_running_stat(name)) ? tape.param(t, name) : tape.constant(t);
    binding.leaf_of.emplace(name, id);
    return id;
  };
  int h = x_node;
  int last_hidden = x_node;
  for (size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    const bool last = (li + 1 == spec.layers.size());
    if (last) last_hidden = h;
    int W = bind(layer_param(li, "W"));
    int b = bind(layer_param(li, "b"));
    h = tape.add(tape.matmul(h, W), tape.bcast_rows(b, n));
    if (l.batch_norm) {
      int gamma = bind(layer_param(li, "bn_gamma"));
      int beta = bind(layer_param(li, "bn_beta"));
      if (mode == Mode::train) {
        // minibatch statistics, biased variance
        int mu = tape.axpb(tape.col_sum(h), 1.0 / static_cast<double>(n), 0.0);
        int xc = tape.sub(h, tape.bcast_rows(mu, n));
        int var = tape.axpb(tape.col_sum(tape.mul(xc, xc)), 1.0 / static_cast<double>(n), 0.0);
        int sd = tape.sqrt_op(tape.axpb(var, 1.0, kBnEps));
        h = tape.div(xc, tape.bcast_rows(sd, n));
        // fold the batch statistics into the running ones
        Tensor<T>& rm = store.at(layer_param(li, "bn_mean"));
        Tensor<T>& rv = store.at(layer_param(li, "bn_var"));
        const Tensor<T>& mu_v = tape.value(mu);
        const Tensor<T>& var_v = tape.value(var);
        const T mom = static_cast<T>(kBnMomentum);
        for (int64_t j = 0; j < rm.numel(); ++j) {
          rm[j] = mom * rm[j] + (T(1) - mom) * mu_v[j];
          rv[j] = mom * rv[j] + (T(1) - mom) * var_v[j];
        }
      } else {
        int rm = bind(layer_param(li, "bn_mean"));
        int rv = bind(layer_param(li, "bn_var"));
        int sd = tape.sqrt_op(tape.axpb(rv, 1.0, kBnEps));
        h = tape.div(tape.sub(h, tape.bcast_rows(rm, n)), tape.bcast_rows(sd, n));
      }
      h = tape.add(tape.mul(h, tape.bcast_rows(gamma, n)), tape.bcast_rows(beta, n));
    }
    const Act act = last ? spec.output_act : l.act;
    switch (act) {
      case Act::identity: break;
      case Act::tanh_fn: h = tape.tanh_op(h); break;
      case Act::sigmoid_fn: h = tape.sigmoid(h); break;
      case Act::relu: h = tape.leaky_relu(h, 0.0); break;
      case Act::leaky_relu: h = tape.leaky_relu(h, kLeakySlope); break;
    }
  }
  BoundForward<T> out;
  out.output = h;
  out.last_hidden = last_hidden;
  return out;
}

// Plain evaluation: runs the same tape construction on a scratch tape and
// copies out the values, so there is exactly one batch-norm/activation
// implementation to trust.
template <class T>
struct EvalResult {
  Tensor<T> output;
  Tensor<T> last_hidden;
};

template <class T>
EvalResult<T> forward_with_features(const NetworkSpec& spec, ParamStore<T>& store,
                                    const Tensor<T>& batch, Mode mode) {
  Tape<T> tape;
  int x = tape.constant(batch);
  TapeBinding binding;
  BoundForward<T> f = forward_on_tape(tape, spec, store, x, mode, /*trainable=*/false, binding);
  EvalResult<T> out;
  out.output = tape.value(f.output);
  out.last_hidden = tape.value(f.last_hidden);
  if (!out.output.all_finite()) throw DataError("non-finite network activations");
  return out;
}

template <class T>
Tensor<T> forward(const NetworkSpec& spec, ParamStore<T>& store, const Tensor<T>& batch, Mode mode) {
  return forward_with_features(spec, store, batch, mode).output;
}

}  // namespace wgad
