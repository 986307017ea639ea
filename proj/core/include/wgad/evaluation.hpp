#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "wgad/scoring.hpp"

namespace wgad {

// Precision-recall analysis with the anomalous class positive throughout.

struct PRPoint {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // sorted by descending threshold

  void validate() const;
  void to_csv(std::ostream& os) const;  // header: threshold,precision,recall
};

// One operating point per distinct score; a sample is classified anomalous
// when score >= threshold, so tied scores flip together.
PRCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& labels);
PRCurve pr_curve(const ScoreReport& report);

// Average-precision step integration: sum of (recall_i - recall_{i-1}) *
// precision_i over ascending recall, starting from recall 0.
double auprc(const PRCurve& curve);

// Quantile of an unsorted sample by linear interpolation at q * (n - 1).
double quantile_linear(std::vector<double> values, double q);

struct BoxplotStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  int64_t count = 0;

  void validate() const;
};

BoxplotStats boxplot_stats(const std::vector<double>& values);

struct LabeledBoxplots {
  BoxplotStats normal;
  BoxplotStats abnormal;

  void to_csv(std::ostream& os) const;  // header: group,min,q1,median,q3,max,count
};

LabeledBoxplots boxplot_by_label(const std::vector<double>& scores, const std::vector<int>& labels);
LabeledBoxplots boxplot_by_label(const ScoreReport& report);

// Static step plot of the curve; the shaded-free area under the steps equals
// the average-precision integral, and the convention is named in <desc>.
std::string pr_curve_svg(const PRCurve& curve);

// metric,value rows: auprc, prevalence, n, positives, and the integration
// convention, so downstream readers need no out-of-band context.
void write_metrics_csv(std::ostream& os, const PRCurve& curve, const ScoreReport& report);

}  // namespace wgad
