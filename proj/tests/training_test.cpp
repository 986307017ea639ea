#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "wgad/checkpoint.hpp"
#include "wgad/datasets.hpp"
#include "wgad/error.hpp"
#include "wgad/network.hpp"
#include "wgad/rng.hpp"
#include "wgad/tensor.hpp"
#include "wgad/training.hpp"

using namespace wgad;

namespace {

NetworkSpec tiny_gen() { return NetworkSpec::dense({2, 8, 8, 2}, Act::leaky_relu, Act::identity); }
NetworkSpec tiny_critic() { return NetworkSpec::dense({2, 8, 8, 1}, Act::leaky_relu, Act::identity); }

GanConfig tiny_config(GanVariant v, uint64_t seed = 7) {
  GanConfig cfg;
  cfg.variant = v;
  cfg.batch = 32;
  cfg.n_critic = 5;
  cfg.epochs = 2;
  cfg.latent_dim = 2;
  cfg.seed = seed;
  return cfg;
}

Tensor<double> small_toy(int64_t n, uint64_t seed = 3) {
  GaussianMixtureSpec mix;
  mix.seed = seed;
  return sample_gaussian_mixture(mix, n);
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("wasserstein_loss is the mean label/output product") {
  CHECK(wasserstein_loss(Tensor<double>::row({1, 1}), Tensor<double>::row({0.2, 0.4})) ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK(wasserstein_loss(Tensor<double>::row({-1, -1}), Tensor<double>::row({0.2, 0.4})) ==
        doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(wasserstein_loss(Tensor<double>::row({1, -1}), Tensor<double>::row({1.0, 1.0})) ==
        doctest::Approx(0.0));
  CHECK_THROWS_AS(wasserstein_loss(Tensor<double>::row({1}), Tensor<double>::row({1.0, 2.0})),
                  DataError);
  CHECK_THROWS_AS(wasserstein_loss(Tensor<double>::row({0.5}), Tensor<double>::row({1.0})),
                  DataError);
}

TEST_CASE("gradient penalty on a linear critic is ((norm of w) - 1)^2") {
  NetworkSpec critic = NetworkSpec::dense({2, 1}, Act::tanh_fn, Act::identity);
  ParamStore<double> params = init_params<double>(critic, 0);
  RngStream rng(5);
  Tensor<double> real(6, 2), fake(6, 2);
  rng.fill_normal(real);
  rng.fill_normal(fake);

  SUBCASE("unit-norm weights give zero penalty for any batch") {
    params.tensors.at("layer0.W") = Tensor<double>::matrix({{0.6}, {0.8}});
    params.tensors.at("layer0.b") = Tensor<double>::row({0.37});
    CHECK(gradient_penalty(critic, params, real, fake, 11) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gradient_penalty(critic, params, real, fake, 99) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("norm-3 weights give penalty 4") {
    params.tensors.at("layer0.W") = Tensor<double>::matrix({{3.0}, {0.0}});
    CHECK(gradient_penalty(critic, params, real, fake, 11) == doctest::Approx(4.0).epsilon(1e-9));
  }
  SUBCASE("mismatched batch shapes are rejected") {
    Tensor<double> short_fake(3, 2);
    CHECK_THROWS_AS(gradient_penalty(critic, params, real, short_fake, 11), AutodiffError);
  }
}

TEST_CASE("single penalized critic update matches the hand-derived Adam step") {
  // 1-D generator and critic, one affine map each, so every quantity in the
  // update has a closed form. For f(x) = w*x + b the interpolation point never
  // matters: the input gradient is w everywhere.
  NetworkSpec gen = NetworkSpec::dense({1, 1}, Act::tanh_fn, Act::identity);
  NetworkSpec critic = NetworkSpec::dense({1, 1}, Act::tanh_fn, Act::identity);
  GanConfig cfg;
  cfg.variant = GanVariant::wgan_gp;
  cfg.latent_dim = 1;
  GanTrainer<double> trainer(gen, critic, cfg);
  trainer.generator_params().tensors.at("layer0.W")[0] = 0.5;
  trainer.generator_params().tensors.at("layer0.b")[0] = 0.25;
  trainer.critic_params().tensors.at("layer0.W")[0] = 0.8;
  trainer.critic_params().tensors.at("layer0.b")[0] = 0.1;

  Tensor<double> real = Tensor<double>::matrix({{1.0}, {2.0}, {-0.5}, {0.75}});
  Tensor<double> z = Tensor<double>::matrix({{0.2}, {-0.4}, {1.0}, {0.0}});
  auto [logged, penalty] = trainer.critic_update(real, z);

  const double w = 0.8, mean_real = 0.8125;
  // fake_i = 0.5 z_i + 0.25 -> mean 0.35; the bias cancels in the difference
  const double mean_fake = 0.35;
  CHECK(logged == doctest::Approx(w * (mean_real - mean_fake)).epsilon(1e-12));

  const double n = std::sqrt(w * w + 1e-12);
  CHECK(penalty == doctest::Approx((n - 1) * (n - 1)).epsilon(1e-9));

  // d/dw [mean f(fake) - mean f(real) + lambda (n-1)^2]
  const double g = (mean_fake - mean_real) + cfg.lambda_gp * 2.0 * (n - 1.0) * (w / n);
  const double expected_w = w - cfg.adam.lr * g / (std::abs(g) + cfg.adam.eps);
  CHECK(trainer.critic_params().tensors.at("layer0.W")[0] ==
        doctest::Approx(expected_w).epsilon(1e-12));
  // the bias gradient vanishes (it cancels between the two batch means and the
  // input gradient does not involve it), so Adam leaves it untouched
  CHECK(trainer.critic_params().tensors.at("layer0.b")[0] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("single standard-GAN discriminator update matches the hand-derived Adam step") {
  NetworkSpec gen = NetworkSpec::dense({1, 1}, Act::tanh_fn, Act::identity);
  NetworkSpec disc = NetworkSpec::dense({1, 1}, Act::tanh_fn, Act::sigmoid_fn);
  GanConfig cfg;
  cfg.variant = GanVariant::gan;
  cfg.latent_dim = 1;
  cfg.n_critic = 1;
  GanTrainer<double> trainer(gen, disc, cfg);
  trainer.generator_params().tensors.at("layer0.W")[0] = 1.0;
  trainer.generator_params().tensors.at("layer0.b")[0] = 0.0;
  trainer.critic_params().tensors.at("layer0.W")[0] = 0.3;
  trainer.critic_params().tensors.at("layer0.b")[0] = -0.2;

  Tensor<double> real = Tensor<double>::matrix({{0.5}, {-1.0}});
  Tensor<double> z = Tensor<double>::matrix({{0.25}, {0.75}});
  auto [logged, penalty] = trainer.critic_update(real, z);
  CHECK(penalty == doctest::Approx(0.0));

  auto sigmoid = [](double u) { return 1.0 / (1.0 + std::exp(-u)); };
  const double w = 0.3, b = -0.2;
  const double xr[2] = {0.5, -1.0};
  const double xf[2] = {0.25, 0.75};  // identity generator
  double objective = 0, dw = 0, db = 0;
  for (int i = 0; i < 2; ++i) {
    const double dr = sigmoid(w * xr[i] + b);
    const double df = sigmoid(w * xf[i] + b);
    objective += std::log(dr) + std::log(1.0 - df);
    dw += (1.0 - dr) * xr[i] - df * xf[i];
    db += (1.0 - dr) - df;
  }
  objective /= 2;
  dw /= 2;
  db /= 2;
  CHECK(logged == doctest::Approx(objective).epsilon(1e-12));

  // the trainer minimizes the negated objective
  const double gw = -dw, gb = -db;
  CHECK(trainer.critic_params().tensors.at("layer0.W")[0] ==
        doctest::Approx(w - cfg.adam.lr * gw / (std::abs(gw) + cfg.adam.eps)).epsilon(1e-12));
  CHECK(trainer.critic_params().tensors.at("layer0.b")[0] ==
        doctest::Approx(b - cfg.adam.lr * gb / (std::abs(gb) + cfg.adam.eps)).epsilon(1e-12));
}

TEST_CASE("training log keeps the n_critic schedule recoverable") {
  Tensor<double> data = small_toy(128);
  GanConfig cfg = tiny_config(GanVariant::wgan_gp);
  TrainedGan<float> run = train_wgan_gp<float>(data, tiny_gen(), tiny_critic(), cfg);

  const int64_t steps_per_epoch = 128 / cfg.batch;
  REQUIRE(run.log.rows.size() ==
          static_cast<size_t>(cfg.epochs * steps_per_epoch * cfg.n_critic));
  int64_t expected_index = 0;
  for (const TrainingLogRow& r : run.log.rows) {
    CHECK(r.update_index == ++expected_index);
    CHECK(r.epoch == (expected_index - 1) / (steps_per_epoch * cfg.n_critic));
    CHECK(std::isfinite(r.critic_loss));
    CHECK(r.penalty >= 0.0);  // penalty non-negativity invariant
    CHECK(std::isfinite(r.gen_loss));
    CHECK(r.wall_ms >= 0.0);
  }
  // gen_loss is 0 until the first generator update, then carried forward
  CHECK(run.log.rows[0].gen_loss == 0.0);
  CHECK(run.log.rows[cfg.n_critic].gen_loss != 0.0);
}

TEST_CASE("identical config and seed reproduce the identical run in 64-bit mode") {
  Tensor<double> data = small_toy(128);
  GanConfig cfg = tiny_config(GanVariant::wgan_gp, 21);
  TrainedGan<double> a = train_wgan_gp<double>(data, tiny_gen(), tiny_critic(), cfg);
  TrainedGan<double> b = train_wgan_gp<double>(data, tiny_gen(), tiny_critic(), cfg);

  REQUIRE(a.log.rows.size() == b.log.rows.size());
  for (size_t i = 0; i < a.log.rows.size(); ++i) {
    CHECK(a.log.rows[i].critic_loss == b.log.rows[i].critic_loss);
    CHECK(a.log.rows[i].penalty == b.log.rows[i].penalty);
    CHECK(a.log.rows[i].gen_loss == b.log.rows[i].gen_loss);
  }
  CHECK(serialize_checkpoint(store_to_named(a.gen_params)) ==
        serialize_checkpoint(store_to_named(b.gen_params)));
  CHECK(serialize_checkpoint(store_to_named(a.critic_params)) ==
        serialize_checkpoint(store_to_named(b.critic_params)));

  TrainedGan<double> c = train_wgan_gp<double>(data, tiny_gen(), tiny_critic(),
                                               tiny_config(GanVariant::wgan_gp, 22));
  CHECK(serialize_checkpoint(store_to_named(a.gen_params)) !=
        serialize_checkpoint(store_to_named(c.gen_params)));
}

TEST_CASE("weight clipping keeps every trainable critic parameter inside the box") {
  Tensor<double> data = small_toy(128);
  GanConfig cfg = tiny_config(GanVariant::wgan_clip);
  TrainedGan<float> run = train_wgan_clip<float>(data, tiny_gen(), tiny_critic(), cfg);
  for (const auto& [name, t] : run.critic_params.tensors) {
    if (is_running_stat(name)) continue;
    for (int64_t i = 0; i < t.numel(); ++i) {
      CHECK(t[i] <= float(cfg.clip));
      CHECK(t[i] >= float(-cfg.clip));
    }
  }
}

TEST_CASE("divergence guard aborts a run whose losses exceed the bound") {
  Tensor<double> data = small_toy(128);
  GanConfig cfg = tiny_config(GanVariant::wgan_gp);
  cfg.divergence_guard = 1e-300;  // any nonzero loss trips it
  CHECK_THROWS_AS(train_wgan_gp<float>(data, tiny_gen(), tiny_critic(), cfg), DivergenceError);
}

TEST_CASE("trainer rejects inconsistent architectures") {
  GanConfig cfg = tiny_config(GanVariant::wgan_gp);
  // batch norm in the critic
  CHECK_THROWS_AS(GanTrainer<float>(tiny_gen(),
                                    NetworkSpec::dense({2, 8, 8, 1}, Act::leaky_relu,
                                                       Act::identity, /*hidden_bn=*/true),
                                    cfg),
                  ConfigError);
  // Wasserstein critic must be linear
  CHECK_THROWS_AS(
      GanTrainer<float>(tiny_gen(),
                        NetworkSpec::dense({2, 8, 8, 1}, Act::leaky_relu, Act::sigmoid_fn), cfg),
      ConfigError);
  // standard GAN discriminator must end in a sigmoid
  GanConfig gan_cfg = tiny_config(GanVariant::gan);
  CHECK_THROWS_AS(GanTrainer<float>(tiny_gen(), tiny_critic(), gan_cfg), ConfigError);
  // generator output vs critic input
  CHECK_THROWS_AS(
      GanTrainer<float>(NetworkSpec::dense({2, 8, 8, 3}, Act::leaky_relu, Act::identity),
                        tiny_critic(), cfg),
      ConfigError);
  // latent width vs generator input
  GanConfig wide = cfg;
  wide.latent_dim = 5;
  CHECK_THROWS_AS(GanTrainer<float>(tiny_gen(), tiny_critic(), wide), ConfigError);
  // empty data
  CHECK_THROWS_AS(train_wgan_gp<float>(Tensor<double>(0, 2), tiny_gen(), tiny_critic(), cfg),
                  DataError);
}

TEST_CASE("training log survives a CSV round trip") {
  TrainingLog log;
  log.divergence_guard = 12345.5;
  log.rows.push_back({1, 0, 1.0 / 3.0, 0.25, -0.725, 10.5});
  log.rows.push_back({2, 0, -0.125, 0.0, -0.725, 21.25});
  std::stringstream ss;
  log.to_csv(ss);
  TrainingLog back = TrainingLog::from_csv(ss);
  CHECK(back.divergence_guard == log.divergence_guard);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].update_index == 1);
  CHECK(back.rows[0].critic_loss == log.rows[0].critic_loss);
  CHECK(back.rows[0].penalty == 0.25);
  CHECK(back.rows[1].gen_loss == -0.725);
  CHECK(back.rows[1].wall_ms == 21.25);
}

TEST_CASE("JS estimate: identical, disjoint, and hand-computed two-bin cases") {
  RngStream rng(17);
  Tensor<double> a(400, 2);
  rng.fill_normal(a);
  CHECK(js_divergence_estimate(a, a, 10) == doctest::Approx(0.0).epsilon(1e-6));

  Tensor<double> far(400, 2);
  for (int64_t i = 0; i < far.rows(); ++i) {
    far(i, 0) = 10.0 + 0.1 * rng.u01();
    far(i, 1) = 10.0 + 0.1 * rng.u01();
  }
  CHECK(js_divergence_estimate(a, far, 2) == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  // two discrete distributions on the grid's diagonal cells: (3/4, 1/4) vs
  // (1/4, 3/4); closed form JS = ln2 - H(3/4) = 0.13081203594113698 nats
  Tensor<double> p = Tensor<double>::matrix({{0, 0}, {0, 0}, {0, 0}, {1, 1}});
  Tensor<double> q = Tensor<double>::matrix({{0, 0}, {1, 1}, {1, 1}, {1, 1}});
  CHECK(js_divergence_estimate(p, q, 2) ==
        doctest::Approx(0.13081203594113698).epsilon(1e-7));
}

TEST_CASE("JS estimate is symmetric and bounded") {
  RngStream rng(23);
  Tensor<double> a(300, 2), b(300, 2);
  rng.fill_normal(a);
  rng.fill_normal(b);
  for (int64_t i = 0; i < b.numel(); ++i) b[i] = 0.5 * b[i] + 0.3;
  const double ab = js_divergence_estimate(a, b, 8);
  const double ba = js_divergence_estimate(b, a, 8);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  CHECK(ab >= 0.0);
  CHECK(ab <= std::log(2.0) + 1e-12);
  CHECK_THROWS_AS(js_divergence_estimate(Tensor<double>(0, 2), a, 8), DataError);
}

TEST_CASE("mode coverage counts modes holding at least 2% of samples") {
  GaussianMixtureSpec mix;
  Tensor<double> centers = mix.centers();

  SUBCASE("all samples at one center") {
    Tensor<double> s(50, 2);
    for (int64_t i = 0; i < 50; ++i) {
      s(i, 0) = centers(1, 0);
      s(i, 1) = centers(1, 1);
    }
    ModeCoverage cov = mode_coverage(s, centers, 0.15);
    CHECK(cov.covered == 1);
    CHECK(cov.fractions[1] == doctest::Approx(1.0));
    CHECK(cov.fractions[0] == doctest::Approx(0.0));
  }
  SUBCASE("balanced samples at all centers") {
    Tensor<double> s(70, 2);
    for (int64_t i = 0; i < 70; ++i) {
      s(i, 0) = centers(i % 7, 0);
      s(i, 1) = centers(i % 7, 1);
    }
    CHECK(mode_coverage(s, centers, 0.15).covered == 7);
  }
  SUBCASE("exactly 2% is covered (inclusive rule)") {
    Tensor<double> s(50, 2);
    for (int64_t i = 0; i < 49; ++i) {
      s(i, 0) = centers(0, 0);
      s(i, 1) = centers(0, 1);
    }
    s(49, 0) = centers(3, 0);  // a single sample: 1/50 = 2%
    s(49, 1) = centers(3, 1);
    ModeCoverage cov = mode_coverage(s, centers, 0.15);
    CHECK(cov.fractions[3] == doctest::Approx(0.02));
    CHECK(cov.covered == 2);
  }
  SUBCASE("samples outside the radius count for no mode") {
    Tensor<double> s = Tensor<double>::matrix({{5.0, 5.0}, {-5.0, -5.0}});
    CHECK(mode_coverage(s, centers, 0.15).covered == 0);
  }
}

TEST_CASE("optimal discriminator oracle follows P_r/(P_r+P_theta)") {
  CHECK(optimal_discriminator_oracle(0.4, 0.4) == doctest::Approx(0.5));
  CHECK(optimal_discriminator_oracle(0.4, 0.0) == doctest::Approx(1.0));
  CHECK(optimal_discriminator_oracle(0.0, 0.4) == doctest::Approx(0.0));
  CHECK(optimal_discriminator_oracle(0.3, 0.1) == doctest::Approx(0.75));
  CHECK_THROWS_AS(optimal_discriminator_oracle(0.0, 0.0), DataError);
}

TEST_CASE("2-D kernel density matches the closed form for a single point") {
  Tensor<double> s = Tensor<double>::matrix({{0.0, 0.0}});
  const double h = 0.05;
  CHECK(kde_density_2d(s, 0.0, 0.0, h) ==
        doctest::Approx(1.0 / (2.0 * M_PI * h * h)).epsilon(1e-12));
  // isotropic: equal distance, equal density
  CHECK(kde_density_2d(s, 0.1, 0.0, h) == doctest::Approx(kde_density_2d(s, 0.0, 0.1, h)));
  CHECK(kde_density_2d(s, 0.1, 0.0, h) < kde_density_2d(s, 0.05, 0.0, h));
}

TEST_CASE("variant names round-trip") {
  for (GanVariant v : {GanVariant::gan, GanVariant::wgan_clip, GanVariant::wgan_gp}) {
    CHECK(variant_from_name(variant_name(v)) == v);
  }
  CHECK_THROWS_AS(variant_from_name("vae"), ConfigError);
}

TEST_SUITE_END();
