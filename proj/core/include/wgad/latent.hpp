#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "wgad/network.hpp"
#include "wgad/optim.hpp"
#include "wgad/rng.hpp"
#include "wgad/tape.hpp"
#include "wgad/tensor.hpp"
#include "wgad/training.hpp"

namespace wgad {

enum class ReconKind : uint8_t { squared_error, cross_entropy };

inline std::string recon_name(ReconKind k) {
  return k == ReconKind::squared_error ? "squared_error" : "cross_entropy";
}

inline ReconKind recon_from_name(const std::string& s) {
  if (s == "squared_error") return ReconKind::squared_error;
  if (s == "cross_entropy") return ReconKind::cross_entropy;
  throw ConfigError("unknown reconstruction loss '" + s + "' (squared_error|cross_entropy)");
}

// Gradient-descent recovery of latent codes for a trained generator. Each
// target row gets `restarts` independent starting points; the best iterate
// (lowest objective, over every step including the start) wins.
struct InversionConfig {
  int64_t steps = 400;
  double step_size = 0.01;
  double lambda_prior = 0.1;  // weight on -log P(z) under the standard normal prior
  int64_t restarts = 3;
  ReconKind recon = ReconKind::squared_error;
  uint64_t seed = 7;

  void validate() const {
    if (steps < 0) throw ConfigError("inversion steps must be >= 0");
    if (step_size <= 0) throw ConfigError("inversion step size must be > 0");
    if (lambda_prior < 0) throw ConfigError("lambda_prior must be >= 0");
    if (restarts < 1) throw ConfigError("inversion needs at least one restart");
  }
};

template <class T>
struct InversionResult {
  Tensor<T> z;      // n x latent, best code found per target row
  Tensor<T> recon;  // G(z) in inference mode
  std::vector<double> objective;   // per-row recon + lambda_prior * (-log P(z))
  std::vector<double> recon_loss;  // reconstruction term alone, at the best iterate
};

// Builds the per-row reconstruction loss column (n x 1) on the tape.
template <class T>
int recon_loss_rows(Tape<T>& tape, ReconKind kind, int target, int output) {
  if (kind == ReconKind::squared_error) {
    int d = tape.sub(target, output);
    return tape.row_sum(tape.mul(d, d));
  }
  // binary cross-entropy, clamped away from log(0); expects outputs in (0, 1)
  int lg = tape.log_op(tape.clamp_min(output, 1e-12));
  int lg1m = tape.log_op(tape.clamp_min(tape.axpb(output, -1.0, 1.0), 1e-12));
  int term = tape.add(tape.mul(target, lg), tape.mul(tape.axpb(target, -1.0, 1.0), lg1m));
  return tape.axpb(tape.row_sum(term), -1.0, 0.0);
}

template <class T>
InversionResult<T> invert_generator(const NetworkSpec& gen_spec, ParamStore<T>& gen_params,
                                    const Tensor<T>& targets, const InversionConfig& cfg) {
  cfg.validate();
  gen_spec.validate();
  const int64_t n = targets.rows();
  if (n < 1) throw DataError("invert_generator needs at least one target row");
  if (targets.cols() != gen_spec.output_width()) {
    throw DataError("target width " + std::to_string(targets.cols()) +
                    " does not match generator output width " +
                    std::to_string(gen_spec.output_width()));
  }
  const int64_t latent = gen_spec.input_width();
  const int64_t rows = n * cfg.restarts;  // candidate index = target * restarts + restart

  Tensor<T> rep(rows, targets.cols());
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t r = 0; r < cfg.restarts; ++r) {
      for (int64_t j = 0; j < targets.cols(); ++j) rep(i * cfg.restarts + r, j) = targets(i, j);
    }
  }

  RngStream rng(substream_seed(cfg.seed, "inversion"));
  Tensor<T> z(rows, latent);
  rng.fill_normal(z);

  const double log2pi_term = 0.5 * static_cast<double>(latent) * std::log(2.0 * M_PI);
  Tensor<T> best_z = z;
  std::vector<double> best_obj(static_cast<size_t>(rows),
                               std::numeric_limits<double>::infinity());
  std::vector<double> best_recon(static_cast<size_t>(rows), 0.0);

  for (int64_t t = 0; t <= cfg.steps; ++t) {
    Tape<T> tape;
    int zn = tape.param(z, "z");
    int xc = tape.constant(rep);
    TapeBinding binding;
    int gz = forward_on_tape(tape, gen_spec, gen_params, zn, Mode::infer, /*trainable=*/false,
                             binding).output;
    int rr = recon_loss_rows(tape, cfg.recon, xc, gz);
    int prior = tape.axpb(tape.row_sum(tape.mul(zn, zn)), 0.5, log2pi_term);
    int obj = tape.add(rr, tape.axpb(prior, cfg.lambda_prior, 0.0));
    const Tensor<T>& obj_v = tape.value(obj);
    const Tensor<T>& rr_v = tape.value(rr);
    for (int64_t i = 0; i < rows; ++i) {
      const double o = static_cast<double>(obj_v[i]);
      if (o < best_obj[static_cast<size_t>(i)]) {
        best_obj[static_cast<size_t>(i)] = o;
        best_recon[static_cast<size_t>(i)] = static_cast<double>(rr_v[i]);
        for (int64_t j = 0; j < latent; ++j) best_z(i, j) = z(i, j);
      }
    }
    if (t == cfg.steps) break;
    Gradient<T> grads = tape.backward(tape.sum(obj));
    const Tensor<T>& g = grads.at("z");
    const T step = static_cast<T>(cfg.step_size);
    for (int64_t i = 0; i < z.numel(); ++i) z[i] -= step * g[i];
  }

  InversionResult<T> out;
  out.z = Tensor<T>(n, latent);
  out.objective.resize(static_cast<size_t>(n));
  out.recon_loss.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    int64_t win = i * cfg.restarts;
    for (int64_t r = 1; r < cfg.restarts; ++r) {
      if (best_obj[static_cast<size_t>(i * cfg.restarts + r)] <
          best_obj[static_cast<size_t>(win)]) {
        win = i * cfg.restarts + r;
      }
    }
    out.objective[static_cast<size_t>(i)] = best_obj[static_cast<size_t>(win)];
    out.recon_loss[static_cast<size_t>(i)] = best_recon[static_cast<size_t>(win)];
    for (int64_t j = 0; j < latent; ++j) out.z(i, j) = best_z(win, j);
  }
  out.recon = forward(gen_spec, gen_params, out.z, Mode::infer);
  return out;
}

// Post-hoc encoder: a deterministic map x -> z trained to reconstruct
// through the frozen generator.
struct EncoderConfig {
  int64_t epochs = 30;
  int64_t batch = 64;
  AdamHyper adam;  // defaults 1e-4, 0.5, 0.9
  uint64_t seed = 7;
  double divergence_guard = 1e6;

  void validate() const {
    if (epochs < 1) throw ConfigError("encoder epochs must be >= 1");
    if (batch < 1) throw ConfigError("encoder batch size must be >= 1");
    if (divergence_guard <= 0) throw ConfigError("divergence guard must be > 0");
  }
};

template <class T>
struct EncoderBundle {
  NetworkSpec enc_spec;
  ParamStore<T> enc_params;
  NetworkSpec gen_spec;
  ParamStore<T> gen_params;
  TrainingLog log;
};

// Minimizes (1/m) sum_i ||G(E(x_i)) - x_i||^2 over encoder parameters with
// Adam. The generator runs in inference mode and binds as constants, so its
// weights and running statistics never move.
template <class T>
EncoderBundle<T> train_encoder(const Tensor<double>& data, const NetworkSpec& enc_spec,
                               const NetworkSpec& gen_spec, const ParamStore<T>& gen_params,
                               const EncoderConfig& cfg) {
  cfg.validate();
  enc_spec.validate();
  gen_spec.validate();
  if (data.numel() == 0) throw DataError("encoder training data is empty");
  if (enc_spec.input_width() != data.cols()) {
    throw ConfigError("encoder input width does not match the data width");
  }
  if (enc_spec.input_width() != gen_spec.output_width() ||
      enc_spec.output_width() != gen_spec.input_width()) {
    throw ConfigError("encoder must map generator outputs back to its latent space");
  }
  const int64_t n = data.rows();
  const int64_t m = cfg.batch;
  const int64_t steps_per_epoch = n / m;
  if (steps_per_epoch < 1) {
    throw ConfigError("dataset of " + std::to_string(n) + " rows cannot fill one batch of " +
                      std::to_string(m));
  }

  EncoderBundle<T> bundle;
  bundle.enc_spec = enc_spec;
  bundle.gen_spec = gen_spec;
  bundle.gen_params = gen_params;
  RngStream init_rng(substream_seed(cfg.seed, "encoder-init"));
  bundle.enc_params = init_params<T>(enc_spec, init_rng);
  AdamState<T> adam;
  adam.hyper = cfg.adam;

  Tensor<T> X = data.template cast<T>();
  RngStream rng(substream_seed(cfg.seed, "encoder-training"));
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();

  bundle.log.divergence_guard = cfg.divergence_guard;
  const auto started = std::chrono::steady_clock::now();
  int64_t update_index = 0;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int64_t step = 0; step < steps_per_epoch; ++step) {
      Tensor<T> batch(m, X.cols());
      if (cursor + static_cast<size_t>(m) > order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      for (int64_t r = 0; r < m; ++r) {
        const int64_t src = order[cursor++];
        for (int64_t c = 0; c < X.cols(); ++c) batch(r, c) = X(src, c);
      }
      Tape<T> tape;
      int xc = tape.constant(std::move(batch));
      TapeBinding bind_e, bind_g;
      int e = forward_on_tape(tape, bundle.enc_spec, bundle.enc_params, xc, Mode::train,
                              /*trainable=*/true, bind_e).output;
      int g = forward_on_tape(tape, bundle.gen_spec, bundle.gen_params, e, Mode::infer,
                              /*trainable=*/false, bind_g).output;
      int d = tape.sub(g, xc);
      int loss = tape.axpb(tape.sum(tape.mul(d, d)), 1.0 / static_cast<double>(m), 0.0);
      Gradient<T> grads = tape.backward(loss);
      adam_step(bundle.enc_params, grads, adam);
      const double v = tape.scalar_value(loss);
      if (!std::isfinite(v) || std::fabs(v) > cfg.divergence_guard) {
        throw DivergenceError("encoder training diverged: loss " + format_double(v) +
                              " tripped the guard " + format_double(cfg.divergence_guard));
      }
      const double ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - started).count();
      bundle.log.rows.push_back({++update_index, epoch, 0.0, 0.0, v, ms});
    }
  }
  return bundle;
}

template <class T>
Tensor<T> encode(EncoderBundle<T>& bundle, const Tensor<T>& x) {
  return forward(bundle.enc_spec, bundle.enc_params, x, Mode::infer);
}

// G(E(x)), both networks in inference mode.
template <class T>
Tensor<T> reconstruct(EncoderBundle<T>& bundle, const Tensor<T>& x) {
  return forward(bundle.gen_spec, bundle.gen_params, encode(bundle, x), Mode::infer);
}

}  // namespace wgad
