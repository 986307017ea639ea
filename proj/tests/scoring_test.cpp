#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "wgad/error.hpp"
#include "wgad/latent.hpp"
#include "wgad/network.hpp"
#include "wgad/rng.hpp"
#include "wgad/scoring.hpp"
#include "wgad/tensor.hpp"

using namespace wgad;

namespace {

template <class T>
std::pair<NetworkSpec, ParamStore<T>> scaled_identity(double scale) {
  NetworkSpec spec = NetworkSpec::dense({2, 2}, Act::tanh_fn, Act::identity);
  ParamStore<T> params = init_params<T>(spec, 0);
  params.tensors.at("layer0.W") = Tensor<T>::matrix({{T(scale), 0}, {0, T(scale)}});
  params.tensors.at("layer0.b") = Tensor<T>::row({0, 0});
  return {spec, params};
}

template <class T>
EncoderBundle<T> identity_bundle(double gen_scale = 1.0) {
  EncoderBundle<T> b;
  auto [es, ep] = scaled_identity<T>(1.0);
  auto [gs, gp] = scaled_identity<T>(gen_scale);
  b.enc_spec = es;
  b.enc_params = ep;
  b.gen_spec = gs;
  b.gen_params = gp;
  return b;
}

}  // namespace

TEST_SUITE_BEGIN("scoring");

TEST_CASE("critic score is zero inside the interval and graded outside") {
  CriticInterval iv{-1.0, 3.0};
  CHECK(critic_score(iv, 1.0) == 0.0);   // midpoint
  CHECK(critic_score(iv, -1.0) == 0.0);  // bounds are inside
  CHECK(critic_score(iv, 3.0) == 0.0);
  CHECK(critic_score(iv, 5.0) == doctest::Approx(2.0));   // upper + 2
  CHECK(critic_score(iv, -2.5) == doctest::Approx(1.5));  // below lower
  CriticInterval bad{1.0, 0.0};
  CHECK_THROWS_AS(critic_score(bad, 0.5), DataError);
}

TEST_CASE("critic interval is the exact min/max of outputs on training data") {
  NetworkSpec critic = NetworkSpec::dense({1, 1}, Act::tanh_fn, Act::identity);
  ParamStore<double> params = init_params<double>(critic, 0);
  params.tensors.at("layer0.W") = Tensor<double>::matrix({{1.0}});
  params.tensors.at("layer0.b") = Tensor<double>::row({0.0});

  Tensor<double> data = Tensor<double>::matrix({{-1.0}, {0.0}, {3.0}});
  CriticInterval iv = fit_critic_interval(critic, params, data);
  CHECK(iv.lower == doctest::Approx(-1.0));
  CHECK(iv.upper == doctest::Approx(3.0));

  // constant critic: lower == upper
  params.tensors.at("layer0.W") = Tensor<double>::matrix({{0.0}});
  params.tensors.at("layer0.b") = Tensor<double>::row({0.7});
  CriticInterval flat = fit_critic_interval(critic, params, data);
  CHECK(flat.lower == doctest::Approx(0.7));
  CHECK(flat.upper == doctest::Approx(0.7));

  CHECK_THROWS_AS(fit_critic_interval(critic, params, Tensor<double>(0, 1)), DataError);
  NetworkSpec wide = NetworkSpec::dense({1, 2}, Act::tanh_fn, Act::identity);
  ParamStore<double> wide_params = init_params<double>(wide, 0);
  CHECK_THROWS_AS(fit_critic_interval(wide, wide_params, data), ConfigError);
}

TEST_CASE("critic scoring over a matrix is pure and matches the scalar path") {
  NetworkSpec critic = NetworkSpec::dense({2, 8, 1}, Act::leaky_relu, Act::identity);
  ParamStore<double> params = init_params<double>(critic, 4);
  RngStream rng(6);
  Tensor<double> train(32, 2), test(8, 2);
  rng.fill_normal(train);
  rng.fill_normal(test);
  CriticInterval iv = fit_critic_interval(critic, params, train);

  std::vector<double> a = critic_scores(critic, params, iv, test);
  std::vector<double> b = critic_scores(critic, params, iv, test);
  REQUIRE(a.size() == 8);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i] >= 0.0);
    CHECK(std::isfinite(a[i]));
    Tensor<double> row(1, 2);
    row(0, 0) = test(static_cast<int64_t>(i), 0);
    row(0, 1) = test(static_cast<int64_t>(i), 1);
    CHECK(a[i] == critic_score(critic, params, iv, row));
  }
  // training points score 0 by construction (they define the interval)
  std::vector<double> on_train = critic_scores(critic, params, iv, train);
  for (double s : on_train) CHECK(s == 0.0);
}

TEST_CASE("mixed scores follow their arithmetic definitions") {
  // lambda_mix * L_D + (1 - lambda_mix) * L_R
  CHECK(anogan_score(2.0, 4.0, 0.0) == doctest::Approx(2.0));
  CHECK(anogan_score(2.0, 4.0, 1.0) == doctest::Approx(4.0));
  CHECK(anogan_score(0.0, 0.0, 0.3) == doctest::Approx(0.0));
  CHECK_THROWS_AS(anogan_score(1.0, 1.0, -0.1), ConfigError);
  CHECK_THROWS_AS(anogan_score(1.0, 1.0, 1.1), ConfigError);
  // affine in the mixing coefficient
  CHECK(anogan_score(2.0, 4.0, 0.5) ==
        doctest::Approx(0.5 * (anogan_score(2.0, 4.0, 0.0) + anogan_score(2.0, 4.0, 1.0))));

  // alpha_mix * L_G + (1 - alpha_mix) * L_D
  CHECK(bigan_style_score(0.0, 0.0, 1.0) == doctest::Approx(0.0));
  CHECK(bigan_style_score(2.0, 4.0, 0.5) == doctest::Approx(3.0));
  CHECK(bigan_style_score(5.0, 4.0, 0.5) >= bigan_style_score(2.0, 4.0, 0.5));
  CHECK_THROWS_AS(bigan_style_score(1.0, 1.0, 2.0), ConfigError);
}

TEST_CASE("encoder MSE score is the mean squared reconstruction error") {
  // identity pipeline reconstructs exactly: score 0
  EncoderBundle<double> id = identity_bundle<double>(1.0);
  Tensor<double> x = Tensor<double>::matrix({{0.5, -1.0}});
  CHECK(encoder_mse_score(id, x) == doctest::Approx(0.0));

  // generator doubling the code: recon = 2x, error mean((x - 2x)^2) = mean(x^2)
  EncoderBundle<double> twice = identity_bundle<double>(2.0);
  CHECK(encoder_mse_score(twice, x) == doctest::Approx((0.25 + 1.0) / 2.0));
  std::vector<double> batch = encoder_mse_scores(twice, Tensor<double>::matrix({{1, 1}, {2, 0}}));
  REQUIRE(batch.size() == 2);
  CHECK(batch[0] == doctest::Approx(1.0));
  CHECK(batch[1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(encoder_mse_score(id, Tensor<double>(2, 2)), DataError);
}

TEST_CASE("inversion-based scores are affine in the mixing coefficient end to end") {
  NetworkSpec gen = NetworkSpec::dense({2, 6, 2}, Act::tanh_fn, Act::identity);
  ParamStore<double> gen_params = init_params<double>(gen, 8);
  NetworkSpec critic = NetworkSpec::dense({2, 6, 1}, Act::leaky_relu, Act::identity);
  ParamStore<double> critic_params = init_params<double>(critic, 9);
  RngStream rng(10);
  Tensor<double> X(3, 2);
  rng.fill_normal(X);
  InversionConfig inv;
  inv.steps = 40;
  inv.restarts = 2;

  std::vector<double> s0 = anogan_scores(gen, gen_params, critic, critic_params, X, inv, 0.0);
  std::vector<double> s1 = anogan_scores(gen, gen_params, critic, critic_params, X, inv, 1.0);
  std::vector<double> sh = anogan_scores(gen, gen_params, critic, critic_params, X, inv, 0.5);
  REQUIRE(s0.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(s0[i] >= 0.0);
    CHECK(s1[i] >= 0.0);
    CHECK(sh[i] == doctest::Approx(0.5 * (s0[i] + s1[i])).epsilon(1e-9));
  }
}

TEST_CASE("a perfect reconstruction pipeline scores zero under the encoder-based mixes") {
  EncoderBundle<double> id = identity_bundle<double>(1.0);
  NetworkSpec critic = NetworkSpec::dense({2, 6, 1}, Act::leaky_relu, Act::identity);
  ParamStore<double> critic_params = init_params<double>(critic, 2);
  Tensor<double> X = Tensor<double>::matrix({{0.4, 0.1}, {-0.7, 0.2}});
  for (double alpha : {0.0, 0.5, 1.0}) {
    std::vector<double> s = bigan_style_scores(id, critic, critic_params, X, alpha);
    for (double v : s) CHECK(v == doctest::Approx(0.0));
  }
}

TEST_CASE("score reports validate and survive a CSV round trip") {
  ScoreReport report = make_report({0.5, 0.0, 2.25}, {0, 1, 1}, "critic_interval", "toy-42");
  std::stringstream ss;
  report.to_csv(ss);
  ScoreReport back = ScoreReport::from_csv(ss);
  REQUIRE(back.rows.size() == 3);
  CHECK(back.rows[0].sample_id == 0);
  CHECK(back.rows[0].score == 0.5);
  CHECK(back.rows[1].label == 1);
  CHECK(back.rows[2].score == 2.25);
  CHECK(back.rows[2].scorer == "critic_interval");
  CHECK(back.rows[2].model == "toy-42");

  CHECK_THROWS_AS(make_report({1.0}, {0, 1}, "s", "m"), DataError);
  ScoreReport bad;
  bad.rows.push_back({0, std::nan(""), 0, "s", "m"});
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad.rows[0] = {0, 1.0, 2, "s", "m"};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad.rows[0] = {0, 1.0, 1, "s,plus", "m"};
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_SUITE_END();
