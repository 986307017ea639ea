#include "wgad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wgad/error.hpp"
#include "wgad/text.hpp"

namespace wgad {

void PRCurve::validate() const {
  if (points.empty()) throw DataError("empty PR curve");
  for (size_t i = 0; i < points.size(); ++i) {
    const PRPoint& p = points[i];
    if (!(p.precision >= 0 && p.precision <= 1)) throw DataError("precision out of [0,1]");
    if (!(p.recall >= 0 && p.recall <= 1)) throw DataError("recall out of [0,1]");
    if (i > 0 && points[i - 1].threshold <= p.threshold) {
      throw DataError("PR thresholds must strictly descend");
    }
    if (i > 0 && points[i - 1].recall > p.recall) {
      throw DataError("recall must not decrease as the threshold drops");
    }
  }
  if (points.back().recall != 1.0) throw DataError("PR curve must end at recall 1");
}

void PRCurve::to_csv(std::ostream& os) const {
  validate();
  os << "threshold,precision,recall\n";
  for (const PRPoint& p : points) {
    os << format_double(p.threshold) << "," << format_double(p.precision) << ","
       << format_double(p.recall) << "\n";
  }
}

PRCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("score/label count mismatch");
  if (scores.empty()) throw DataError("cannot build a PR curve from no samples");
  int64_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError("labels must be 0 or 1");
    positives += l;
  }
  if (positives == 0 || positives == static_cast<int64_t>(labels.size())) {
    throw DataError("PR curve needs both classes present");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw DataError("non-finite score");
  }

  // walk samples by descending score; each distinct value closes one
  // operating point covering every sample at or above it
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  PRCurve curve;
  int64_t tp = 0, pp = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    tp += labels[order[i]];
    pp += 1;
    const bool last_of_tie = (i + 1 == order.size()) || scores[order[i + 1]] != scores[order[i]];
    if (last_of_tie) {
      PRPoint p;
      p.threshold = scores[order[i]];
      p.precision = static_cast<double>(tp) / static_cast<double>(pp);
      p.recall = static_cast<double>(tp) / static_cast<double>(positives);
      curve.points.push_back(p);
    }
  }
  curve.validate();
  return curve;
}

PRCurve pr_curve(const ScoreReport& report) {
  report.validate();
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(report.rows.size());
  labels.reserve(report.rows.size());
  for (const ScoreRow& r : report.rows) {
    scores.push_back(r.score);
    labels.push_back(r.label);
  }
  return pr_curve(scores, labels);
}

double auprc(const PRCurve& curve) {
  curve.validate();
  double area = 0;
  double prev_recall = 0;
  for (const PRPoint& p : curve.points) {
    area += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return area;
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty group");
  if (q < 0 || q > 1) throw ConfigError("quantile must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * w;
}

void BoxplotStats::validate() const {
  if (count < 1) throw DataError("boxplot over an empty group");
  if (!(min <= q1 && q1 <= median && median <= q3 && q3 <= max)) {
    throw DataError("boxplot quartiles are out of order");
  }
}

BoxplotStats boxplot_stats(const std::vector<double>& values) {
  if (values.empty()) throw DataError("boxplot over an empty group");
  BoxplotStats s;
  s.count = static_cast<int64_t>(values.size());
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.q1 = quantile_linear(values, 0.25);
  s.median = quantile_linear(values, 0.5);
  s.q3 = quantile_linear(values, 0.75);
  s.validate();
  return s;
}

void LabeledBoxplots::to_csv(std::ostream& os) const {
  os << "group,min,q1,median,q3,max,count\n";
  auto row = [&](const char* group, const BoxplotStats& s) {
    os << group << "," << format_double(s.min) << "," << format_double(s.q1) << ","
       << format_double(s.median) << "," << format_double(s.q3) << "," << format_double(s.max)
       << "," << s.count << "\n";
  };
  row("normal", normal);
  row("abnormal", abnormal);
}

LabeledBoxplots boxplot_by_label(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("score/label count mismatch");
  std::vector<double> norm, abnorm;
  for (size_t i = 0; i < scores.size(); ++i) {
    (labels[i] == 1 ? abnorm : norm).push_back(scores[i]);
  }
  LabeledBoxplots out;
  out.normal = boxplot_stats(norm);
  out.abnormal = boxplot_stats(abnorm);
  return out;
}

LabeledBoxplots boxplot_by_label(const ScoreReport& report) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const ScoreRow& r : report.rows) {
    scores.push_back(r.score);
    labels.push_back(r.label);
  }
  return boxplot_by_label(scores, labels);
}

std::string pr_curve_svg(const PRCurve& curve) {
  curve.validate();
  const double width = 640, height = 480;
  const double ml = 64, mr = 24, mt = 44, mb = 56;
  auto px = [&](double recall) { return ml + recall * (width - ml - mr); };
  auto py = [&](double precision) { return mt + (1.0 - precision) * (height - mt - mb); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "  <desc>precision-recall curve; integration convention: average_precision_step"
         " (area under the plotted steps equals the reported AUPRC)</desc>\n";
  svg << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  // grid and tick labels at quarter intervals
  for (int i = 0; i <= 4; ++i) {
    const double f = 0.25 * i;
    svg << "  <line x1=\"" << px(f) << "\" y1=\"" << py(0) << "\" x2=\"" << px(f) << "\" y2=\""
        << py(1) << "\" stroke=\"#dddddd\"/>\n";
    svg << "  <line x1=\"" << px(0) << "\" y1=\"" << py(f) << "\" x2=\"" << px(1) << "\" y2=\""
        << py(f) << "\" stroke=\"#dddddd\"/>\n";
    svg << "  <text x=\"" << px(f) << "\" y=\"" << py(0) + 20
        << "\" font-size=\"12\" text-anchor=\"middle\">" << format_double(f) << "</text>\n";
    svg << "  <text x=\"" << px(0) - 8 << "\" y=\"" << py(f) + 4
        << "\" font-size=\"12\" text-anchor=\"end\">" << format_double(f) << "</text>\n";
  }
  svg << "  <line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
      << py(0) << "\" stroke=\"black\"/>\n";
  svg << "  <line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\""
      << py(1) << "\" stroke=\"black\"/>\n";

  // steps: precision_i applies over the recall interval (recall_{i-1}, recall_i]
  std::ostringstream path;
  path << "M " << format_double(px(0)) << " " << format_double(py(curve.points.front().precision));
  double prev_recall = 0;
  for (size_t i = 0; i < curve.points.size(); ++i) {
    const PRPoint& p = curve.points[i];
    if (i > 0) path << " V " << format_double(py(p.precision));
    path << " H " << format_double(px(p.recall));
    prev_recall = p.recall;
  }
  (void)prev_recall;
  svg << "  <path d=\"" << path.str() << "\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\"/>\n";

  svg << "  <text x=\"" << (ml + (width - ml - mr) / 2) << "\" y=\"" << (mt - 16)
      << "\" font-size=\"16\" text-anchor=\"middle\">Precision-Recall (AUPRC = "
      << format_double(auprc(curve)) << ")</text>\n";
  svg << "  <text x=\"" << (ml + (width - ml - mr) / 2) << "\" y=\"" << (height - 12)
      << "\" font-size=\"13\" text-anchor=\"middle\">recall</text>\n";
  svg << "  <text x=\"18\" y=\"" << (mt + (height - mt - mb) / 2)
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (mt + (height - mt - mb) / 2) << ")\">precision</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void write_metrics_csv(std::ostream& os, const PRCurve& curve, const ScoreReport& report) {
  int64_t positives = 0;
  for (const ScoreRow& r : report.rows) positives += r.label;
  const int64_t n = static_cast<int64_t>(report.rows.size());
  os << "metric,value\n";
  os << "auprc," << format_double(auprc(curve)) << "\n";
  os << "prevalence," << format_double(static_cast<double>(positives) / static_cast<double>(n))
     << "\n";
  os << "n," << n << "\n";
  os << "positives," << positives << "\n";
  os << "integration,average_precision_step\n";
}

}  // namespace wgad
