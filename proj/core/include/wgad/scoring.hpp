#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "wgad/latent.hpp"
#include "wgad/network.hpp"
#include "wgad/parallel.hpp"
#include "wgad/tensor.hpp"
#include "wgad/text.hpp"

namespace wgad {

// Higher score = more anomalous, for every scorer.
struct ScoreRow {
  int64_t sample_id = 0;
  double score = 0;
  int label = 0;  // 1 = anomalous
  std::string scorer;
  std::string model;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;

  void validate() const {
    for (const ScoreRow& r : rows) {
      if (!std::isfinite(r.score)) {
        throw DataError("non-finite score for sample " + std::to_string(r.sample_id));
      }
      if (r.label != 0 && r.label != 1) {
        throw DataError("label for sample " + std::to_string(r.sample_id) + " must be 0 or 1");
      }
      if (r.scorer.find(',') != std::string::npos || r.model.find(',') != std::string::npos) {
        throw DataError("scorer and model ids must not contain commas");
      }
    }
  }

  void to_csv(std::ostream& os) const {
    validate();
    os << "sample_id,score,label,scorer,model\n";
    for (const ScoreRow& r : rows) {
      os << r.sample_id << "," << format_double(r.score) << "," << r.label << "," << r.scorer
         << "," << r.model << "\n";
    }
  }

  static ScoreReport from_csv(std::istream& is) {
    ScoreReport report;
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (!header_seen) {
        header_seen = true;
        continue;
      }
      auto cols = split(t, ',');
      if (cols.size() != 5) throw DataError("score row needs 5 columns, got: " + t);
      ScoreRow r;
      r.sample_id = parse_int(cols[0], "score report");
      r.score = parse_double(cols[1], "score report");
      r.label = static_cast<int>(parse_int(cols[2], "score report"));
      r.scorer = cols[3];
      r.model = cols[4];
      report.rows.push_back(std::move(r));
    }
    report.validate();
    return report;
  }
};

inline ScoreReport make_report(const std::vector<double>& scores, const std::vector<int>& labels,
                               std::string scorer, std::string model) {
  if (scores.size() != labels.size()) {
    throw DataError("score/label count mismatch: " + std::to_string(scores.size()) + " vs " +
                    std::to_string(labels.size()));
  }
  ScoreReport report;
  report.rows.resize(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    report.rows[i] = {static_cast<int64_t>(i), scores[i], labels[i], scorer, model};
  }
  report.validate();
  return report;
}

// Confidence interval of critic outputs over the training normals.
struct CriticInterval {
  double lower = 0;
  double upper = 0;

  void validate() const {
    if (!(lower <= upper)) throw DataError("critic interval has lower > upper");
  }
};

template <class T>
CriticInterval fit_critic_interval(const NetworkSpec& critic_spec, ParamStore<T>& critic_params,
                                   const Tensor<T>& train_data) {
  if (train_data.rows() < 1) throw DataError("cannot fit a critic interval on empty data");
  if (critic_spec.output_width() != 1) throw ConfigError("critic must be scalar-output");
  Tensor<T> out = forward(critic_spec, critic_params, train_data, Mode::infer);
  CriticInterval iv;
  iv.lower = std::numeric_limits<double>::infinity();
  iv.upper = -std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < out.rows(); ++i) {
    const double v = static_cast<double>(out(i, 0));
    iv.lower = std::min(iv.lower, v);
    iv.upper = std::max(iv.upper, v);
  }
  iv.validate();
  return iv;
}

// 0 inside the interval, graded distance to the nearest bound outside, so the
// score sweeps a proper PR curve; interval membership is score == 0.
inline double critic_score(const CriticInterval& interval, double critic_output) {
  interval.validate();
  if (critic_output < interval.lower) return interval.lower - critic_output;
  if (critic_output > interval.upper) return critic_output - interval.upper;
  return 0.0;
}

template <class T>
double critic_score(const NetworkSpec& critic_spec, ParamStore<T>& critic_params,
                    const CriticInterval& interval, const Tensor<T>& x) {
  Tensor<T> out = forward(critic_spec, critic_params, x, Mode::infer);
  if (out.numel() != 1) throw DataError("critic_score expects a single sample row");
  return critic_score(interval, static_cast<double>(out[0]));
}

template <class T>
std::vector<double> critic_scores(const NetworkSpec& critic_spec, ParamStore<T>& critic_params,
                                  const CriticInterval& interval, const Tensor<T>& X) {
  Tensor<T> out = forward(critic_spec, critic_params, X, Mode::infer);
  std::vector<double> scores(static_cast<size_t>(X.rows()));
  for (int64_t i = 0; i < X.rows(); ++i) {
    scores[static_cast<size_t>(i)] = critic_score(interval, static_cast<double>(out(i, 0)));
  }
  return scores;
}

namespace detail {

// Per-row sum of absolute differences; rows are independent, so chunking
// across them cannot change any value.
template <class T>
std::vector<double> l1_row_distance(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    throw DataError("row distance shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }
  std::vector<double> d(static_cast<size_t>(a.rows()));
  parallel_for(a.rows(), [&](int64_t i) {
    double acc = 0;
    for (int64_t j = 0; j < a.cols(); ++j) {
      acc += std::fabs(static_cast<double>(a(i, j)) - static_cast<double>(b(i, j)));
    }
    d[static_cast<size_t>(i)] = acc;
  });
  return d;
}

template <class T>
std::vector<double> mse_rows(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    throw DataError("row distance shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }
  std::vector<double> d(static_cast<size_t>(a.rows()));
  parallel_for(a.rows(), [&](int64_t i) {
    double acc = 0;
    for (int64_t j = 0; j < a.cols(); ++j) {
      const double e = static_cast<double>(a(i, j)) - static_cast<double>(b(i, j));
      acc += e * e;
    }
    d[static_cast<size_t>(i)] = acc / static_cast<double>(a.cols());
  });
  return d;
}

}  // namespace detail

// lambda_mix * L_D + (1 - lambda_mix) * L_R: feature-matching distance mixed
// with the residual reconstruction distance.
inline double anogan_score(double residual, double feature_distance, double lambda_mix) {
  if (lambda_mix < 0 || lambda_mix > 1) throw ConfigError("lambda_mix must lie in [0,1]");
  return lambda_mix * feature_distance + (1.0 - lambda_mix) * residual;
}

// alpha_mix * L_G + (1 - alpha_mix) * L_D, the encoder-based analogue: L_G is
// the reconstruction distance through G(E(x)), L_D the feature-matching term.
inline double bigan_style_score(double recon_distance, double feature_distance, double alpha_mix) {
  if (alpha_mix < 0 || alpha_mix > 1) throw ConfigError("alpha_mix must lie in [0,1]");
  return alpha_mix * recon_distance + (1.0 - alpha_mix) * feature_distance;
}

// Inversion-based scores for a whole test matrix. The critic's last hidden
// activations stand in for "an intermediate layer".
template <class T>
std::vector<double> anogan_scores(const NetworkSpec& gen_spec, ParamStore<T>& gen_params,
                                  const NetworkSpec& critic_spec, ParamStore<T>& critic_params,
                                  const Tensor<T>& X, const InversionConfig& inv,
                                  double lambda_mix) {
  if (lambda_mix < 0 || lambda_mix > 1) throw ConfigError("lambda_mix must lie in [0,1]");
  InversionResult<T> res = invert_generator(gen_spec, gen_params, X, inv);
  EvalResult<T> fx = forward_with_features(critic_spec, critic_params, X, Mode::infer);
  EvalResult<T> fr = forward_with_features(critic_spec, critic_params, res.recon, Mode::infer);
  std::vector<double> residual = detail::l1_row_distance(X, res.recon);
  std::vector<double> feat = detail::l1_row_distance(fx.last_hidden, fr.last_hidden);
  std::vector<double> scores(residual.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = anogan_score(residual[i], feat[i], lambda_mix);
  }
  return scores;
}

template <class T>
std::vector<double> bigan_style_scores(EncoderBundle<T>& bundle, const NetworkSpec& critic_spec,
                                       ParamStore<T>& critic_params, const Tensor<T>& X,
                                       double alpha_mix) {
  if (alpha_mix < 0 || alpha_mix > 1) throw ConfigError("alpha_mix must lie in [0,1]");
  Tensor<T> recon = reconstruct(bundle, X);
  EvalResult<T> fx = forward_with_features(critic_spec, critic_params, X, Mode::infer);
  EvalResult<T> fr = forward_with_features(critic_spec, critic_params, recon, Mode::infer);
  std::vector<double> lg = detail::l1_row_distance(X, recon);
  std::vector<double> ld = detail::l1_row_distance(fx.last_hidden, fr.last_hidden);
  std::vector<double> scores(lg.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = bigan_style_score(lg[i], ld[i], alpha_mix);
  }
  return scores;
}

// Mean over components of (x - G(E(x)))^2.
template <class T>
std::vector<double> encoder_mse_scores(EncoderBundle<T>& bundle, const Tensor<T>& X) {
  Tensor<T> recon = reconstruct(bundle, X);
  return detail::mse_rows(X, recon);
}

template <class T>
double encoder_mse_score(EncoderBundle<T>& bundle, const Tensor<T>& x) {
  if (x.rows() != 1) throw DataError("encoder_mse_score expects a single sample row");
  return encoder_mse_scores(bundle, x)[0];
}

}  // namespace wgad
