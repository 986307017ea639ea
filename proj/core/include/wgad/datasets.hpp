#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "wgad/rng.hpp"
#include "wgad/tensor.hpp"

namespace wgad {

// ---------------------------------------------------------------------------
// Toy data: a ring of isotropic Gaussians.
// ---------------------------------------------------------------------------

struct GaussianMixtureSpec {
  int64_t k = 7;        // number of modes
  double radius = 1.0;  // circle radius holding the centers
  double sigma = 0.05;  // per-mode isotropic standard deviation
  double phase = 0.0;   // angle of the first center, radians
  uint64_t seed = 7;

  void validate() const;
  Tensor<double> centers() const;  // k x 2, angles phase + 2*pi*j/k
};

// n x 2 samples: mode uniform among k, then center + sigma * normal per axis.
Tensor<double> sample_gaussian_mixture(const GaussianMixtureSpec& spec, int64_t n);

// Mixture density at a point (exact, not estimated).
double mixture_density(const GaussianMixtureSpec& spec, double x, double y);

// Density level enclosing 99% of mixture mass: the 1st-percentile density
// over 1e6 Monte-Carlo draws (quantile by linear interpolation), pinned to
// the spec seed's "toy-threshold" substream.
double toy_density_threshold(const GaussianMixtureSpec& spec);

// 1 where the mixture density falls below the 99%-mass level, else 0. The
// second form reuses an already computed threshold.
std::vector<int> toy_anomaly_label(const GaussianMixtureSpec& spec, const Tensor<double>& points);
std::vector<int> toy_anomaly_label(const GaussianMixtureSpec& spec, const Tensor<double>& points,
                                   double threshold);

// n x 2 points drawn uniformly from the box [-half_width, half_width]^2 and
// rejected until the density sits below the anomaly threshold: genuine
// anomalies by the same criterion toy_anomaly_label applies.
Tensor<double> sample_toy_anomalies(const GaussianMixtureSpec& spec, int64_t n,
                                    double half_width = 1.6);

// ---------------------------------------------------------------------------
// Labeled datasets and the leave-one-class-out protocol.
// ---------------------------------------------------------------------------

struct LabeledDataset {
  Tensor<double> samples;   // N x d
  std::vector<int> labels;  // 1 = anomalous
  std::string split;        // "train" | "test"
  std::string provenance;   // free-form origin note

  void validate() const;  // label count matches N; a train split holds no anomalies
  int64_t size() const { return samples.rows(); }
};

// CSV with a one-line header: label,f0,f1,...
void dataset_to_csv(const LabeledDataset& ds, std::ostream& os);
LabeledDataset dataset_from_csv(std::istream& is, std::string split, std::string provenance);

// ---------------------------------------------------------------------------
// IDX image/label files (gzip accepted transparently).
// ---------------------------------------------------------------------------

struct IdxImages {
  Tensor<double> pixels;  // N x (rows*cols), scaled to [0,1]
  int64_t rows = 0, cols = 0;
};

struct IdxContent {
  bool is_images = false;
  IdxImages images;         // set when is_images
  std::vector<int> labels;  // set otherwise
};

// Dispatches on the big-endian magic: 0x00000803 = images, 0x00000801 = labels.
IdxContent load_idx(const std::string& path);
IdxImages load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);

// Writers for fixtures and round-trip tests (plain, not gzipped).
void write_idx_images(const std::string& path, const std::vector<uint8_t>& pixels, int64_t n,
                      int64_t rows, int64_t cols);
void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels);

// 80% of the normal classes for training; the held-out 20% plus every sample
// of the abnormal class (labeled 1) for testing. Shuffle order is pinned by
// the seed's "split" substream.
std::pair<LabeledDataset, LabeledDataset> leave_one_class_out(const Tensor<double>& samples,
                                                              const std::vector<int>& class_ids,
                                                              int abnormal_class, uint64_t seed,
                                                              const std::string& provenance);

std::pair<LabeledDataset, LabeledDataset> leave_one_digit_out_split(const Tensor<double>& images,
                                                                    const std::vector<int>& labels,
                                                                    int abnormal_digit,
                                                                    uint64_t seed);

// Non-overlapping block averaging of square images; factor must divide the side.
Tensor<double> downsample_images(const Tensor<double>& images, int64_t factor);

// ---------------------------------------------------------------------------
// Human-activity time series.
// ---------------------------------------------------------------------------

struct TimeSeriesWindow {
  Tensor<double> values;          // T x C, one column per channel
  double sampling_rate_hz = 50.0;
  int activity = 0;               // 1..6
};

inline constexpr int64_t kHarWindowLength = 128;
inline constexpr int64_t kHarChannelCount = 9;

// Index 0..5 maps activity labels 1..6.
const std::vector<std::string>& har_activity_names();
int har_activity_id(const std::string& name);  // tolerant of case and spaces

// Channel file prefixes in order: total_acc x,y,z; body_acc x,y,z; body_gyro x,y,z.
const std::vector<std::string>& har_channel_prefixes();

// Reads the nine whitespace-separated signal matrices plus the y_* label file
// from `directory` (or its "Inertial Signals" subdirectory), one row per
// 128-step window.
std::vector<TimeSeriesWindow> load_har(const std::string& directory);

// R[i,j] = |s_i - s_j| for a single-channel series (T x 1 or 1 x T).
Tensor<double> recurrence_matrix(const Tensor<double>& series);

// Multi-channel version: one T x T distance plot per column of a T x C series.
std::vector<Tensor<double>> recurrence_channels(const Tensor<double>& series);

// Block-mean along time; factor must divide the window length.
Tensor<double> downsample_time(const Tensor<double>& series, int64_t factor);

enum class HarRepresentation : uint8_t { raw, recurrence };

struct HarSplitConfig {
  std::string abnormal_activity;  // e.g. "laying"
  std::vector<int> channels;      // indexes 0..8 into the 9 channels; empty = all
  HarRepresentation representation = HarRepresentation::raw;
  int64_t time_downsample = 1;
  uint64_t seed = 7;
};

// Per-channel affine transform fitted on the train split.
struct HarStandardization {
  std::vector<double> mean;
  std::vector<double> sd;
};

struct HarSplit {
  LabeledDataset train;
  LabeledDataset test;
  HarStandardization transform;
};

// Mirrors the leave-one-class-out protocol over activities. Channels are
// selected, optionally time-downsampled, standardized per channel with
// statistics from the train split only, then flattened (raw) or expanded to
// per-channel recurrence images.
HarSplit har_anomaly_split(const std::vector<TimeSeriesWindow>& windows,
                           const HarSplitConfig& cfg);

}  // namespace wgad
