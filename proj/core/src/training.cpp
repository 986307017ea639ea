#include "wgad/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "wgad/error.hpp"

namespace wgad {

namespace {

constexpr double kPseudoCount = 1e-9;

struct Grid2D {
  double lo_x, hi_x, lo_y, hi_y;
  int bins;

  int cell(double x, double y) const {
    auto idx = [&](double v, double lo, double hi) {
      int i = static_cast<int>(static_cast<double>(bins) * (v - lo) / (hi - lo));
      return std::clamp(i, 0, bins - 1);
    };
    return idx(x, lo_x, hi_x) * bins + idx(y, lo_y, hi_y);
  }
};

std::vector<double> histogram(const Tensor<double>& s, const Grid2D& g) {
  std::vector<double> h(static_cast<size_t>(g.bins) * g.bins, kPseudoCount);
  for (int64_t i = 0; i < s.rows(); ++i) h[static_cast<size_t>(g.cell(s(i, 0), s(i, 1)))] += 1.0;
  const double total = static_cast<double>(s.rows()) + kPseudoCount * static_cast<double>(h.size());
  for (double& v : h) v /= total;
  return h;
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0;
  for (size_t i = 0; i < p.size(); ++i) acc += p[i] * std::log(p[i] / q[i]);
  return acc;
}

}  // namespace

double js_divergence_estimate(const Tensor<double>& p_samples, const Tensor<double>& q_samples,
                              int bins) {
  if (p_samples.cols() != 2 || q_samples.cols() != 2) {
    throw DataError("js_divergence_estimate expects 2-D samples (n x 2)");
  }
  if (p_samples.rows() == 0 || q_samples.rows() == 0) {
    throw DataError("js_divergence_estimate on an empty sample set");
  }
  if (bins < 1) throw ConfigError("js_divergence_estimate needs bins >= 1");
  Grid2D g;
  g.bins = bins;
  g.lo_x = g.lo_y = std::numeric_limits<double>::infinity();
  g.hi_x = g.hi_y = -std::numeric_limits<double>::infinity();
  auto grow = [&](const Tensor<double>& s) {
    for (int64_t i = 0; i < s.rows(); ++i) {
      g.lo_x = std::min(g.lo_x, s(i, 0));
      g.hi_x = std::max(g.hi_x, s(i, 0));
      g.lo_y = std::min(g.lo_y, s(i, 1));
      g.hi_y = std::max(g.hi_y, s(i, 1));
    }
  };
  grow(p_samples);
  grow(q_samples);
  // degenerate axes (all samples share a coordinate) still need a nonzero bin width
  if (g.hi_x <= g.lo_x) g.hi_x = g.lo_x + 1.0;
  if (g.hi_y <= g.lo_y) g.hi_y = g.lo_y + 1.0;
  const std::vector<double> p = histogram(p_samples, g);
  const std::vector<double> q = histogram(q_samples, g);
  std::vector<double> m(p.size());
  for (size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl(p, m) + 0.5 * kl(q, m);
}

ModeCoverage mode_coverage(const Tensor<double>& samples, const Tensor<double>& centers,
                           double radius) {
  if (samples.cols() != centers.cols()) {
    throw DataError("mode_coverage dimension mismatch: samples are " + samples.shape_str() +
                    ", centers are " + centers.shape_str());
  }
  if (centers.rows() == 0) throw DataError("mode_coverage needs at least one center");
  if (samples.rows() == 0) throw DataError("mode_coverage on an empty sample set");
  if (radius <= 0) throw ConfigError("mode_coverage radius must be > 0");
  std::vector<int64_t> hits(static_cast<size_t>(centers.rows()), 0);
  for (int64_t i = 0; i < samples.rows(); ++i) {
    int64_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int64_t c = 0; c < centers.rows(); ++c) {
      double d2 = 0;
      for (int64_t j = 0; j < samples.cols(); ++j) {
        const double d = samples(i, j) - centers(c, j);
        d2 += d * d;
      }
      if (d2 < best_d2) {
        best_d2 = d2;
        best = c;
      }
    }
    if (best_d2 <= radius * radius) ++hits[static_cast<size_t>(best)];
  }
  ModeCoverage out;
  out.fractions.resize(hits.size());
  const double n = static_cast<double>(samples.rows());
  for (size_t c = 0; c < hits.size(); ++c) {
    out.fractions[c] = static_cast<double>(hits[c]) / n;
    if (out.fractions[c] >= 0.02) ++out.covered;
  }
  return out;
}

double optimal_discriminator_oracle(double p_real, double p_gen) {
  if (p_real < 0 || p_gen < 0) throw DataError("densities must be non-negative");
  if (p_real == 0 && p_gen == 0) {
    throw DataError("optimal discriminator is undefined where both densities vanish");
  }
  return p_real / (p_real + p_gen);
}

double kde_density_2d(const Tensor<double>& samples, double x, double y, double bandwidth) {
  if (samples.cols() != 2) throw DataError("kde_density_2d expects 2-D samples (n x 2)");
  if (samples.rows() == 0) throw DataError("kde_density_2d on an empty sample set");
  if (bandwidth <= 0) throw ConfigError("kde bandwidth must be > 0");
  const double h2 = bandwidth * bandwidth;
  const double norm = 1.0 / (2.0 * M_PI * h2 * static_cast<double>(samples.rows()));
  double acc = 0;
  for (int64_t i = 0; i < samples.rows(); ++i) {
    const double dx = x - samples(i, 0);
    const double dy = y - samples(i, 1);
    acc += std::exp(-0.5 * (dx * dx + dy * dy) / h2);
  }
  return norm * acc;
}

}  // namespace wgad
