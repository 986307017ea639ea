#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "wgad/network.hpp"
#include "wgad/optim.hpp"
#include "wgad/rng.hpp"
#include "wgad/tape.hpp"
#include "wgad/tensor.hpp"
#include "wgad/text.hpp"

namespace wgad {

enum class GanVariant : uint8_t { gan, wgan_clip, wgan_gp };

inline std::string variant_name(GanVariant v) {
  switch (v) {
    case GanVariant::gan: return "gan";
    case GanVariant::wgan_clip: return "wgan_clip";
    case GanVariant::wgan_gp: return "wgan_gp";
  }
  return "?";
}

inline GanVariant variant_from_name(const std::string& s) {
  if (s == "gan") return GanVariant::gan;
  if (s == "wgan_clip") return GanVariant::wgan_clip;
  if (s == "wgan_gp") return GanVariant::wgan_gp;
  throw ConfigError("unknown training variant '" + s + "' (gan|wgan_clip|wgan_gp)");
}

struct GanConfig {
  GanVariant variant = GanVariant::wgan_gp;
  int64_t batch = 64;        // m
  int64_t n_critic = 5;      // k for the standard GAN
  int64_t epochs = 30;
  int64_t latent_dim = 2;    // d'
  double lambda_gp = 10.0;
  double clip = 0.01;        // c
  AdamHyper adam;            // defaults 1e-4, 0.5, 0.9
  RmspropHyper rmsprop;      // default lr 5e-5
  uint64_t seed = 7;
  double divergence_guard = 1e6;

  void validate() const {
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (n_critic < 1) throw ConfigError("n_critic must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (latent_dim < 1) throw ConfigError("latent dimension must be >= 1");
    if (lambda_gp < 0) throw ConfigError("lambda_gp must be >= 0");
    if (clip <= 0) throw ConfigError("clip bound must be > 0");
    if (divergence_guard <= 0) throw ConfigError("divergence guard must be > 0");
  }
};

struct TrainingLogRow {
  int64_t update_index = 0;
  int64_t epoch = 0;
  double critic_loss = 0;
  double penalty = 0;
  double gen_loss = 0;
  double wall_ms = 0;
};

// One row per critic/discriminator update; gen_loss carries the most recent
// generator-update loss (0 before the first), so every field stays finite and
// the n_critic schedule is recoverable as rows-per-generator-update.
struct TrainingLog {
  double divergence_guard = 1e6;
  std::vector<TrainingLogRow> rows;

  void to_csv(std::ostream& os) const {
    os << "# divergence_guard " << format_double(divergence_guard) << "\n";
    os << "update_index,epoch,critic_loss,penalty,gen_loss,wall_ms\n";
    for (const TrainingLogRow& r : rows) {
      os << r.update_index << "," << r.epoch << "," << format_double(r.critic_loss) << ","
         << format_double(r.penalty) << "," << format_double(r.gen_loss) << ","
         << format_double(r.wall_ms) << "\n";
    }
  }

  static TrainingLog from_csv(std::istream& is) {
    TrainingLog log;
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t[0] == '#') {
        auto parts = split(t, ' ');
        if (parts.size() == 3 && parts[1] == "divergence_guard") {
          log.divergence_guard = parse_double(parts[2], "training log");
        }
        continue;
      }
      if (!header_seen) {
        header_seen = true;  // column header
        continue;
      }
      auto cols = split(t, ',');
      if (cols.size() != 6) throw DataError("training log row needs 6 columns, got: " + t);
      TrainingLogRow r;
      r.update_index = parse_int(cols[0], "training log");
      r.epoch = parse_int(cols[1], "training log");
      r.critic_loss = parse_double(cols[2], "training log");
      r.penalty = parse_double(cols[3], "training log");
      r.gen_loss = parse_double(cols[4], "training log");
      r.wall_ms = parse_double(cols[5], "training log");
      log.rows.push_back(r);
    }
    return log;
  }
};

// mean(labels * outputs) with labels in {-1, +1}; +1 marks real, -1 generated.
template <class T>
double wasserstein_loss(const Tensor<T>& labels, const Tensor<T>& outputs) {
  if (labels.numel() != outputs.numel()) {
    throw DataError("wasserstein_loss length mismatch: " + std::to_string(labels.numel()) +
                    " labels vs " + std::to_string(outputs.numel()) + " outputs");
  }
  if (labels.numel() == 0) throw DataError("wasserstein_loss on empty vectors");
  double acc = 0;
  for (int64_t i = 0; i < labels.numel(); ++i) {
    const double l = static_cast<double>(labels[i]);
    if (l != 1.0 && l != -1.0) throw DataError("wasserstein_loss labels must be +1 or -1");
    acc += l * static_cast<double>(outputs[i]);
  }
  return acc / static_cast<double>(labels.numel());
}

inline constexpr double kGpNormEps = 1e-12;

// Builds mean((||grad_xhat f(xhat)||_2 - 1)^2) on the tape, with xhat the
// per-sample interpolate eps*real + (1-eps)*fake, eps ~ U[0,1] drawn per
// sample. The gradient w.r.t. xhat is emitted as tape ops, so the returned
// scalar is differentiable w.r.t. the critic parameters.
template <class T>
int gradient_penalty_node(Tape<T>& tape, const NetworkSpec& critic_spec, ParamStore<T>& critic,
                          TapeBinding& binding, const Tensor<T>& real, const Tensor<T>& fake,
                          RngStream& rng) {
  if (!real.same_shape(fake)) {
    throw AutodiffError("gradient penalty batches differ in shape: " + real.shape_str() + " vs " +
                        fake.shape_str());
  }
  const int64_t n = real.rows();
  Tensor<T> xhat(real.shape());
  for (int64_t i = 0; i < n; ++i) {
    const T e = static_cast<T>(rng.u01());
    for (int64_t j = 0; j < real.cols(); ++j) {
      xhat(i, j) = e * real(i, j) + (T(1) - e) * fake(i, j);
    }
  }
  int x = tape.input(std::move(xhat), "xhat");
  BoundForward<T> f = forward_on_tape(tape, critic_spec, critic, x, Mode::train, /*trainable=*/true, binding);
  if (tape.value(f.output).cols() != 1) {
    throw AutodiffError("gradient penalty expects a scalar-output critic");
  }
  int s = tape.sum(f.output);  // rows are independent, so d(sum)/d(xhat) stacks per-sample gradients
  int gx = tape.input_gradient(s, x);
  int norms = tape.sqrt_op(tape.axpb(tape.row_sum(tape.mul(gx, gx)), 1.0, kGpNormEps));
  int diff = tape.axpb(norms, 1.0, -1.0);
  return tape.axpb(tape.sum(tape.mul(diff, diff)), 1.0 / static_cast<double>(n), 0.0);
}

// Value-only convenience used by tests and diagnostics.
template <class T>
double gradient_penalty(const NetworkSpec& critic_spec, ParamStore<T>& critic,
                        const Tensor<T>& real, const Tensor<T>& fake, uint64_t seed) {
  Tape<T> tape;
  TapeBinding binding;
  RngStream rng(seed);
  int pen = gradient_penalty_node(tape, critic_spec, critic, binding, real, fake, rng);
  return tape.scalar_value(pen);
}

// The three training procedures share this driver. Parameters are initialized
// from the "init" substream (generator first, then critic); minibatch order,
// latent draws, and interpolation draws all come from the "training"
// substream, so a (config, seed) pair pins the whole run.
template <class T>
class GanTrainer {
 public:
  GanTrainer(NetworkSpec gen_spec, NetworkSpec critic_spec, GanConfig cfg)
      : gen_spec_(std::move(gen_spec)),
        critic_spec_(std::move(critic_spec)),
        cfg_(cfg),
        train_rng_(substream_seed(cfg.seed, "training")) {
    cfg_.validate();
    gen_spec_.validate();
    critic_spec_.validate();
    for (const LayerSpec& l : critic_spec_.layers) {
      if (l.batch_norm) {
        throw ConfigError("batch norm inside the critic breaks per-sample gradients; remove it");
      }
    }
    if (cfg_.variant == GanVariant::gan && critic_spec_.output_act != Act::sigmoid_fn) {
      throw ConfigError("the standard GAN discriminator must end in a sigmoid");
    }
    if (cfg_.variant != GanVariant::gan && critic_spec_.output_act != Act::identity) {
      throw ConfigError("the Wasserstein critic must have a linear output");
    }
    if (gen_spec_.output_width() != critic_spec_.input_width()) {
      throw ConfigError("generator output width does not match critic input width");
    }
    if (gen_spec_.input_width() != cfg_.latent_dim) {
      throw ConfigError("generator input width does not match latent_dim");
    }
    RngStream init_rng(substream_seed(cfg.seed, "init"));
    gen_params_ = init_params<T>(gen_spec_, init_rng);
    critic_params_ = init_params<T>(critic_spec_, init_rng);
    adam_g_.hyper = cfg_.adam;
    adam_c_.hyper = cfg_.adam;
    rms_g_.hyper = cfg_.rmsprop;
    rms_c_.hyper = cfg_.rmsprop;
  }

  // One critic (or discriminator) update on explicit batches. Returns the
  // logged loss and the penalty value (0 outside the penalty variant).
  std::pair<double, double> critic_update(const Tensor<T>& real, const Tensor<T>& z) {
    const int64_t m = real.rows();
    Tensor<T> fake = forward(gen_spec_, gen_params_, z, Mode::train);
    Tape<T> tape;
    TapeBinding binding;
    int xr = tape.constant(real);
    int xf = tape.constant(fake);
    double logged = 0, penalty = 0;
    if (cfg_.variant == GanVariant::gan) {
      int dr = forward_on_tape(tape, critic_spec_, critic_params_, xr, Mode::train, true, binding).output;
      int df = forward_on_tape(tape, critic_spec_, critic_params_, xf, Mode::train, true, binding).output;
      int term_r = tape.sum(tape.log_op(tape.clamp_min(dr, 1e-12)));
      int term_f = tape.sum(tape.log_op(tape.clamp_min(tape.axpb(df, -1.0, 1.0), 1e-12)));
      int objective = tape.axpb(tape.add(term_r, term_f), 1.0 / static_cast<double>(m), 0.0);
      int loss = tape.axpb(objective, -1.0, 0.0);  // ascend by minimizing the negation
      Gradient<T> grads = tape.backward(loss);
      adam_step(critic_params_, grads, adam_c_);
      logged = tape.scalar_value(objective);
    } else {
      int fr = forward_on_tape(tape, critic_spec_, critic_params_, xr, Mode::train, true, binding).output;
      int ff = forward_on_tape(tape, critic_spec_, critic_params_, xf, Mode::train, true, binding).output;
      int mean_fr = tape.axpb(tape.sum(fr), 1.0 / static_cast<double>(m), 0.0);
      int mean_ff = tape.axpb(tape.sum(ff), 1.0 / static_cast<double>(m), 0.0);
      int loss = tape.sub(mean_ff, mean_fr);  // critic ascends the surrogate
      if (cfg_.variant == GanVariant::wgan_gp && cfg_.lambda_gp > 0) {
        int pen = gradient_penalty_node(tape, critic_spec_, critic_params_, binding, real, fake, train_rng_);
        penalty = tape.scalar_value(pen);
        loss = tape.add(loss, tape.axpb(pen, cfg_.lambda_gp, 0.0));
      }
      Gradient<T> grads = tape.backward(loss);
      if (cfg_.variant == GanVariant::wgan_clip) {
        rmsprop_step(critic_params_, grads, rms_c_);
        weight_clip(critic_params_, cfg_.clip);
      } else {
        adam_step(critic_params_, grads, adam_c_);
      }
      // the logged "loss" is the Wasserstein surrogate mean f(x) - mean f(G(z)),
      // without the penalty; that difference is what should trend toward 0
      logged = tape.scalar_value(mean_fr) - tape.scalar_value(mean_ff);
    }
    guard(logged, "critic");
    guard(penalty, "penalty");
    return {logged, penalty};
  }

  // One generator update; returns the logged generator loss.
  double generator_update(const Tensor<T>& z) {
    const int64_t m = z.rows();
    Tape<T> tape;
    TapeBinding bind_g, bind_c;
    int zn = tape.constant(z);
    int gz = forward_on_tape(tape, gen_spec_, gen_params_, zn, Mode::train, true, bind_g).output;
    int f = forward_on_tape(tape, critic_spec_, critic_params_, gz, Mode::train, false, bind_c).output;
    int loss;
    if (cfg_.variant == GanVariant::gan) {
      // non-saturating convention: ascend log D(G(z))
      loss = tape.axpb(tape.sum(tape.log_op(tape.clamp_min(f, 1e-12))), -1.0 / static_cast<double>(m), 0.0);
    } else {
      loss = tape.axpb(tape.sum(f), -1.0 / static_cast<double>(m), 0.0);
    }
    Gradient<T> grads = tape.backward(loss);
    if (cfg_.variant == GanVariant::wgan_clip) {
      rmsprop_step(gen_params_, grads, rms_g_);
    } else {
      adam_step(gen_params_, grads, adam_g_);
    }
    const double logged = tape.scalar_value(loss);
    guard(logged, "generator");
    return logged;
  }

  Tensor<T> sample_latent(int64_t n) {
    Tensor<T> z(n, cfg_.latent_dim);
    train_rng_.fill_normal(z);
    return z;
  }

  // Inference-mode samples from the current generator, using the caller's stream.
  Tensor<T> generate(int64_t n, RngStream& rng) {
    Tensor<T> z(n, cfg_.latent_dim);
    rng.fill_normal(z);
    return forward(gen_spec_, gen_params_, z, Mode::infer);
  }

  TrainingLog train(const Tensor<double>& data) {
    const int64_t n = data.rows();
    const int64_t m = cfg_.batch;
    const int64_t steps_per_epoch = n / m;
    if (steps_per_epoch < 1) {
      throw ConfigError("dataset of " + std::to_string(n) + " rows cannot fill one batch of " +
                        std::to_string(m));
    }
    Tensor<T> X = data.template cast<T>();
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();  // trigger an initial shuffle
    auto next_real = [&]() {
      Tensor<T> batch(m, X.cols());
      if (cursor + static_cast<size_t>(m) > order.size()) {
        train_rng_.shuffle(order);
        cursor = 0;
      }
      for (int64_t r = 0; r < m; ++r) {
        const int64_t src = order[cursor++];
        for (int64_t c = 0; c < X.cols(); ++c) batch(r, c) = X(src, c);
      }
      return batch;
    };
    TrainingLog log;
    log.divergence_guard = cfg_.divergence_guard;
    const auto started = std::chrono::steady_clock::now();
    auto wall_ms = [&]() {
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    };
    int64_t update_index = 0;
    double last_gen_loss = 0;
    for (int64_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
      for (int64_t step = 0; step < steps_per_epoch; ++step) {
        for (int64_t c = 0; c < cfg_.n_critic; ++c) {
          Tensor<T> real = next_real();
          Tensor<T> z = sample_latent(m);
          auto [loss, pen] = critic_update(real, z);
          log.rows.push_back({++update_index, epoch, loss, pen, last_gen_loss, wall_ms()});
        }
        last_gen_loss = generator_update(sample_latent(m));
      }
    }
    return log;
  }

  const NetworkSpec& generator_spec() const { return gen_spec_; }
  const NetworkSpec& critic_spec() const { return critic_spec_; }
  ParamStore<T>& generator_params() { return gen_params_; }
  ParamStore<T>& critic_params() { return critic_params_; }
  const GanConfig& config() const { return cfg_; }

 private:
  void guard(double v, const char* what) const {
    if (!std::isfinite(v) || std::fabs(v) > cfg_.divergence_guard) {
      throw DivergenceError(std::string("training diverged: ") + what + " value " +
                            format_double(v) + " tripped the guard " +
                            format_double(cfg_.divergence_guard));
    }
  }

  NetworkSpec gen_spec_, critic_spec_;
  GanConfig cfg_;
  ParamStore<T> gen_params_, critic_params_;
  AdamState<T> adam_g_, adam_c_;
  RmspropState<T> rms_g_, rms_c_;
  RngStream train_rng_;
};

// Convenience wrappers naming the three procedures.
template <class T>
struct TrainedGan {
  ParamStore<T> gen_params;
  ParamStore<T> critic_params;
  TrainingLog log;
};

template <class T>
TrainedGan<T> train_standard_gan(const Tensor<double>& data, const NetworkSpec& gen_spec,
                                 const NetworkSpec& disc_spec, GanConfig cfg) {
  if (data.numel() == 0) throw DataError("training data is empty");
  cfg.variant = GanVariant::gan;
  GanTrainer<T> t(gen_spec, disc_spec, cfg);
  TrainingLog log = t.train(data);
  return {std::move(t.generator_params()), std::move(t.critic_params()), std::move(log)};
}

template <class T>
TrainedGan<T> train_wgan_gp(const Tensor<double>& data, const NetworkSpec& gen_spec,
                            const NetworkSpec& critic_spec, GanConfig cfg) {
  if (data.numel() == 0) throw DataError("training data is empty");
  cfg.variant = GanVariant::wgan_gp;
  GanTrainer<T> t(gen_spec, critic_spec, cfg);
  TrainingLog log = t.train(data);
  return {std::move(t.generator_params()), std::move(t.critic_params()), std::move(log)};
}

template <class T>
TrainedGan<T> train_wgan_clip(const Tensor<double>& data, const NetworkSpec& gen_spec,
                              const NetworkSpec& critic_spec, GanConfig cfg) {
  if (data.numel() == 0) throw DataError("training data is empty");
  cfg.variant = GanVariant::wgan_clip;
  GanTrainer<T> t(gen_spec, critic_spec, cfg);
  TrainingLog log = t.train(data);
  return {std::move(t.generator_params()), std::move(t.critic_params()), std::move(log)};
}

// Histogram-based Jensen-Shannon divergence between two 2-D sample sets, in
// nats, on a shared bounding grid with additive pseudocount 1e-9.
double js_divergence_estimate(const Tensor<double>& p_samples, const Tensor<double>& q_samples,
                              int bins);

struct ModeCoverage {
  int covered = 0;
  std::vector<double> fractions;  // per mode: share of samples within radius
};

// Assigns each sample to its nearest center; a mode counts as covered when at
// least 2% of all samples land within `radius` of it.
ModeCoverage mode_coverage(const Tensor<double>& samples, const Tensor<double>& centers,
                           double radius);

// Density-ratio oracle: P_r(x) / (P_r(x) + P_theta(x)).
double optimal_discriminator_oracle(double p_real, double p_gen);

// Gaussian kernel density over generated samples, the P_theta estimate for
// the 2-D diagnostic.
double kde_density_2d(const Tensor<double>& samples, double x, double y, double bandwidth);

}  // namespace wgad
