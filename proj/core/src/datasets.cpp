#include "wgad/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "wgad/error.hpp"
#include "wgad/text.hpp"

namespace fs = std::filesystem;

namespace wgad {

namespace {

// Quantile of a sorted vector by linear interpolation at position q*(n-1).
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of an empty vector");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * w;
}

Tensor<double> sample_mixture_with(const GaussianMixtureSpec& spec, int64_t n, RngStream& rng) {
  const Tensor<double> c = spec.centers();
  Tensor<double> out(n, 2);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t j = rng.uniform_int(spec.k);
    out(i, 0) = c(j, 0) + spec.sigma * rng.normal();
    out(i, 1) = c(j, 1) + spec.sigma * rng.normal();
  }
  return out;
}

}  // namespace

void GaussianMixtureSpec::validate() const {
  if (k < 1) throw ConfigError("mixture needs k >= 1 modes");
  if (radius <= 0) throw ConfigError("mixture radius must be > 0");
  if (sigma <= 0) throw ConfigError("mixture sigma must be > 0");
}

Tensor<double> GaussianMixtureSpec::centers() const {
  validate();
  Tensor<double> c(k, 2);
  for (int64_t j = 0; j < k; ++j) {
    const double angle = phase + 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(k);
    c(j, 0) = radius * std::cos(angle);
    c(j, 1) = radius * std::sin(angle);
  }
  return c;
}

Tensor<double> sample_gaussian_mixture(const GaussianMixtureSpec& spec, int64_t n) {
  spec.validate();
  if (n < 1) throw DataError("sample count must be >= 1");
  RngStream rng(substream_seed(spec.seed, "data"));
  return sample_mixture_with(spec, n, rng);
}

double mixture_density(const GaussianMixtureSpec& spec, double x, double y) {
  spec.validate();
  const Tensor<double> c = spec.centers();
  const double inv_two_var = 1.0 / (2.0 * spec.sigma * spec.sigma);
  const double norm = 1.0 / (static_cast<double>(spec.k) * 2.0 * M_PI * spec.sigma * spec.sigma);
  double acc = 0;
  for (int64_t j = 0; j < spec.k; ++j) {
    const double dx = x - c(j, 0);
    const double dy = y - c(j, 1);
    acc += std::exp(-(dx * dx + dy * dy) * inv_two_var);
  }
  return norm * acc;
}

double toy_density_threshold(const GaussianMixtureSpec& spec) {
  spec.validate();
  constexpr int64_t kDraws = 1000000;
  RngStream rng(substream_seed(spec.seed, "toy-threshold"));
  const Tensor<double> draws = sample_mixture_with(spec, kDraws, rng);
  std::vector<double> densities(static_cast<size_t>(kDraws));
  for (int64_t i = 0; i < kDraws; ++i) {
    densities[static_cast<size_t>(i)] = mixture_density(spec, draws(i, 0), draws(i, 1));
  }
  std::sort(densities.begin(), densities.end());
  return quantile_sorted(densities, 0.01);
}

std::vector<int> toy_anomaly_label(const GaussianMixtureSpec& spec, const Tensor<double>& points) {
  return toy_anomaly_label(spec, points, toy_density_threshold(spec));
}

std::vector<int> toy_anomaly_label(const GaussianMixtureSpec& spec, const Tensor<double>& points,
                                   double threshold) {
  if (points.cols() != 2) throw DataError("toy points must be n x 2");
  std::vector<int> labels(static_cast<size_t>(points.rows()));
  for (int64_t i = 0; i < points.rows(); ++i) {
    labels[static_cast<size_t>(i)] =
        mixture_density(spec, points(i, 0), points(i, 1)) < threshold ? 1 : 0;
  }
  return labels;
}

Tensor<double> sample_toy_anomalies(const GaussianMixtureSpec& spec, int64_t n,
                                    double half_width) {
  spec.validate();
  if (n < 1) throw DataError("sample count must be >= 1");
  if (half_width <= 0) throw ConfigError("anomaly box half-width must be > 0");
  const double threshold = toy_density_threshold(spec);
  RngStream rng(substream_seed(spec.seed, "toy-anomalies"));
  Tensor<double> out(n, 2);
  const int64_t max_attempts = 1000 * n;
  int64_t accepted = 0;
  for (int64_t attempt = 0; attempt < max_attempts && accepted < n; ++attempt) {
    const double x = -half_width + 2.0 * half_width * rng.u01();
    const double y = -half_width + 2.0 * half_width * rng.u01();
    if (mixture_density(spec, x, y) < threshold) {
      out(accepted, 0) = x;
      out(accepted, 1) = y;
      ++accepted;
    }
  }
  if (accepted < n) {
    throw DataError("rejection sampling found too few low-density points; widen the box");
  }
  return out;
}

void LabeledDataset::validate() const {
  if (static_cast<size_t>(samples.rows()) != labels.size()) {
    throw DataError("dataset has " + std::to_string(samples.rows()) + " rows but " +
                    std::to_string(labels.size()) + " labels");
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw DataError("label at row " + std::to_string(i) + " must be 0 or 1");
    }
    if (split == "train" && labels[i] == 1) {
      throw DataError("train split contains an anomalous sample at row " + std::to_string(i));
    }
  }
}

void dataset_to_csv(const LabeledDataset& ds, std::ostream& os) {
  ds.validate();
  os << "label";
  for (int64_t j = 0; j < ds.samples.cols(); ++j) os << ",f" << j;
  os << "\n";
  for (int64_t i = 0; i < ds.samples.rows(); ++i) {
    os << ds.labels[static_cast<size_t>(i)];
    for (int64_t j = 0; j < ds.samples.cols(); ++j) os << "," << format_double(ds.samples(i, j));
    os << "\n";
  }
}

LabeledDataset dataset_from_csv(std::istream& is, std::string split_tag, std::string provenance) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("dataset CSV is empty");
  const auto header = split(trim(line), ',');
  if (header.size() < 2 || header[0] != "label") {
    throw DataError("dataset CSV header must start with 'label,f0,...'");
  }
  const size_t width = header.size() - 1;
  std::vector<int> labels;
  std::vector<double> values;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cols = split(t, ',');
    if (cols.size() != width + 1) {
      throw DataError("dataset CSV row has " + std::to_string(cols.size()) + " columns, expected " +
                      std::to_string(width + 1));
    }
    labels.push_back(static_cast<int>(parse_int(cols[0], "dataset CSV")));
    for (size_t j = 1; j < cols.size(); ++j) values.push_back(parse_double(cols[j], "dataset CSV"));
  }
  if (labels.empty()) throw DataError("dataset CSV has no data rows");
  LabeledDataset ds;
  ds.samples = Tensor<double>(static_cast<int64_t>(labels.size()), static_cast<int64_t>(width));
  std::copy(values.begin(), values.end(), ds.samples.data());
  ds.labels = std::move(labels);
  ds.split = std::move(split_tag);
  ds.provenance = std::move(provenance);
  ds.validate();
  return ds;
}

namespace {

std::vector<uint8_t> read_file_maybe_gz(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw DataError("cannot open '" + path + "'");
  std::vector<uint8_t> bytes;
  std::vector<uint8_t> buf(1 << 16);
  int got = 0;
  while ((got = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
    bytes.insert(bytes.end(), buf.begin(), buf.begin() + got);
  }
  const bool failed = got < 0;
  gzclose(f);
  if (failed) throw DataError("failed reading '" + path + "'");
  return bytes;
}

uint32_t be_u32(const std::vector<uint8_t>& b, size_t off, const std::string& path) {
  if (off + 4 > b.size()) throw DataError("truncated IDX file '" + path + "'");
  return (static_cast<uint32_t>(b[off]) << 24) | (static_cast<uint32_t>(b[off + 1]) << 16) |
         (static_cast<uint32_t>(b[off + 2]) << 8) | static_cast<uint32_t>(b[off + 3]);
}

void be_u32_out(std::ofstream& os, uint32_t v) {
  const uint8_t bytes[4] = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                            static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

IdxContent load_idx(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file_maybe_gz(path);
  const uint32_t magic = be_u32(bytes, 0, path);
  IdxContent out;
  if (magic == kIdxImagesMagic) {
    const int64_t n = be_u32(bytes, 4, path);
    const int64_t rows = be_u32(bytes, 8, path);
    const int64_t cols = be_u32(bytes, 12, path);
    if (n < 1 || rows < 1 || cols < 1) throw DataError("IDX image file '" + path + "' has empty dimensions");
    const size_t need = 16 + static_cast<size_t>(n) * rows * cols;
    if (bytes.size() < need) throw DataError("truncated IDX file '" + path + "'");
    out.is_images = true;
    out.images.rows = rows;
    out.images.cols = cols;
    out.images.pixels = Tensor<double>(n, rows * cols);
    for (int64_t i = 0; i < n * rows * cols; ++i) {
      out.images.pixels[i] = static_cast<double>(bytes[16 + static_cast<size_t>(i)]) / 255.0;
    }
  } else if (magic == kIdxLabelsMagic) {
    const int64_t n = be_u32(bytes, 4, path);
    if (n < 1) throw DataError("IDX label file '" + path + "' is empty");
    if (bytes.size() < 8 + static_cast<size_t>(n)) throw DataError("truncated IDX file '" + path + "'");
    out.is_images = false;
    out.labels.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out.labels[static_cast<size_t>(i)] = bytes[8 + static_cast<size_t>(i)];
  } else {
    std::ostringstream oss;
    oss << "'" << path << "' is not an IDX image/label file (magic 0x" << std::hex << magic << ")";
    throw DataError(oss.str());
  }
  return out;
}

IdxImages load_idx_images(const std::string& path) {
  IdxContent c = load_idx(path);
  if (!c.is_images) throw DataError("'" + path + "' holds labels, expected images");
  return std::move(c.images);
}

std::vector<int> load_idx_labels(const std::string& path) {
  IdxContent c = load_idx(path);
  if (c.is_images) throw DataError("'" + path + "' holds images, expected labels");
  return std::move(c.labels);
}

void write_idx_images(const std::string& path, const std::vector<uint8_t>& pixels, int64_t n,
                      int64_t rows, int64_t cols) {
  if (n < 1 || rows < 1 || cols < 1) throw DataError("IDX dimensions must be positive");
  if (pixels.size() != static_cast<size_t>(n) * rows * cols) {
    throw DataError("pixel count does not match n*rows*cols");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path + "'");
  be_u32_out(os, kIdxImagesMagic);
  be_u32_out(os, static_cast<uint32_t>(n));
  be_u32_out(os, static_cast<uint32_t>(rows));
  be_u32_out(os, static_cast<uint32_t>(cols));
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!os) throw DataError("failed writing '" + path + "'");
}

void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels) {
  if (labels.empty()) throw DataError("IDX label list is empty");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path + "'");
  be_u32_out(os, kIdxLabelsMagic);
  be_u32_out(os, static_cast<uint32_t>(labels.size()));
  os.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (!os) throw DataError("failed writing '" + path + "'");
}

std::pair<LabeledDataset, LabeledDataset> leave_one_class_out(const Tensor<double>& samples,
                                                              const std::vector<int>& class_ids,
                                                              int abnormal_class, uint64_t seed,
                                                              const std::string& provenance) {
  if (static_cast<size_t>(samples.rows()) != class_ids.size()) {
    throw DataError("sample/class count mismatch");
  }
  std::vector<int64_t> normal, abnormal;
  for (size_t i = 0; i < class_ids.size(); ++i) {
    (class_ids[i] == abnormal_class ? abnormal : normal).push_back(static_cast<int64_t>(i));
  }
  if (normal.empty()) throw DataError("no normal samples remain after leaving the class out");
  if (abnormal.empty()) throw DataError("no samples of the abnormal class are present");
  RngStream rng(substream_seed(seed, "split"));
  rng.shuffle(normal);
  const int64_t n_train = std::llround(0.8 * static_cast<double>(normal.size()));

  auto gather = [&](const std::vector<int64_t>& idx, const std::vector<int>& lab,
                    const std::string& split) {
    LabeledDataset ds;
    ds.samples = Tensor<double>(static_cast<int64_t>(idx.size()), samples.cols());
    for (size_t r = 0; r < idx.size(); ++r) {
      for (int64_t c = 0; c < samples.cols(); ++c) {
        ds.samples(static_cast<int64_t>(r), c) = samples(idx[r], c);
      }
    }
    ds.labels = lab;
    ds.split = split;
    ds.provenance = provenance;
    ds.validate();
    return ds;
  };

  std::vector<int64_t> train_idx(normal.begin(), normal.begin() + n_train);
  std::vector<int64_t> test_idx(normal.begin() + n_train, normal.end());
  std::vector<int> test_labels(test_idx.size(), 0);
  test_idx.insert(test_idx.end(), abnormal.begin(), abnormal.end());
  test_labels.insert(test_labels.end(), abnormal.size(), 1);

  return {gather(train_idx, std::vector<int>(train_idx.size(), 0), "train"),
          gather(test_idx, test_labels, "test")};
}

std::pair<LabeledDataset, LabeledDataset> leave_one_digit_out_split(const Tensor<double>& images,
                                                                    const std::vector<int>& labels,
                                                                    int abnormal_digit,
                                                                    uint64_t seed) {
  if (abnormal_digit < 0 || abnormal_digit > 9) {
    throw ConfigError("abnormal digit must lie in 0..9");
  }
  return leave_one_class_out(images, labels, abnormal_digit, seed,
                             "leave-one-digit-out abnormal=" + std::to_string(abnormal_digit));
}

Tensor<double> downsample_images(const Tensor<double>& images, int64_t factor) {
  if (factor < 1) throw ConfigError("downsample factor must be >= 1");
  const int64_t d = images.cols();
  const int64_t side = std::llround(std::sqrt(static_cast<double>(d)));
  if (side * side != d) throw DataError("images are not square; cannot downsample");
  if (side % factor != 0) {
    throw DataError("factor " + std::to_string(factor) + " does not divide side " +
                    std::to_string(side));
  }
  const int64_t out_side = side / factor;
  Tensor<double> out(images.rows(), out_side * out_side);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (int64_t i = 0; i < images.rows(); ++i) {
    for (int64_t r = 0; r < out_side; ++r) {
      for (int64_t c = 0; c < out_side; ++c) {
        double acc = 0;
        for (int64_t dr = 0; dr < factor; ++dr) {
          for (int64_t dc = 0; dc < factor; ++dc) {
            acc += images(i, (r * factor + dr) * side + (c * factor + dc));
          }
        }
        out(i, r * out_side + c) = acc * inv;
      }
    }
  }
  return out;
}

const std::vector<std::string>& har_activity_names() {
  static const std::vector<std::string> names = {"walking",  "walking_upstairs",
                                                 "walking_downstairs", "sitting",
                                                 "standing", "laying"};
  return names;
}

int har_activity_id(const std::string& name) {
  std::string key;
  for (char ch : name) {
    if (ch == ' ' || ch == '-') {
      key.push_back('_');
    } else {
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  const auto& names = har_activity_names();
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == key) return static_cast<int>(i) + 1;
  }
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : "|") + n;
  throw ConfigError("unknown activity '" + name + "' (" + valid + ")");
}

const std::vector<std::string>& har_channel_prefixes() {
  static const std::vector<std::string> prefixes = {
      "total_acc_x", "total_acc_y", "total_acc_z", "body_acc_x", "body_acc_y",
      "body_acc_z",  "body_gyro_x", "body_gyro_y", "body_gyro_z"};
  return prefixes;
}

namespace {

std::string find_by_prefix(const std::vector<fs::path>& dirs, const std::string& prefix) {
  std::vector<std::string> hits;
  for (const fs::path& dir : dirs) {
    if (!fs::is_directory(dir)) continue;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (name.rfind(prefix, 0) == 0) hits.push_back(entry.path().string());
    }
  }
  if (hits.empty()) throw DataError("no file starting with '" + prefix + "' under the data directory");
  std::sort(hits.begin(), hits.end());
  return hits.front();
}

// One row of whitespace-separated reals (the signal files pad with multiple spaces).
std::vector<double> parse_signal_row(const std::string& line, const std::string& path) {
  std::vector<double> row;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p >= end) break;
    const char* tok = p;
    while (p < end && *p != ' ' && *p != '\t' && *p != '\r') ++p;
    double v = 0;
    const auto res = std::from_chars(tok, p, v);
    if (res.ec != std::errc() || res.ptr != p) {
      throw DataError("bad number in '" + path + "': " + std::string(tok, p));
    }
    row.push_back(v);
  }
  return row;
}

std::vector<std::vector<double>> load_signal_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(parse_signal_row(line, path));
    if (rows.back().size() != static_cast<size_t>(kHarWindowLength)) {
      throw DataError("'" + path + "' row " + std::to_string(rows.size()) + " has " +
                      std::to_string(rows.back().size()) + " values, expected 128");
    }
  }
  if (rows.empty()) throw DataError("'" + path + "' holds no windows");
  return rows;
}

}  // namespace

std::vector<TimeSeriesWindow> load_har(const std::string& directory) {
  const std::vector<fs::path> dirs = {fs::path(directory), fs::path(directory) / "Inertial Signals"};
  if (!fs::is_directory(directory)) throw DataError("'" + directory + "' is not a directory");

  std::vector<std::vector<std::vector<double>>> signals;
  signals.reserve(static_cast<size_t>(kHarChannelCount));
  size_t n_windows = 0;
  for (const std::string& prefix : har_channel_prefixes()) {
    signals.push_back(load_signal_matrix(find_by_prefix(dirs, prefix)));
    if (signals.size() == 1) {
      n_windows = signals.front().size();
    } else if (signals.back().size() != n_windows) {
      throw DataError("signal '" + prefix + "' has " + std::to_string(signals.back().size()) +
                      " windows; the first signal has " + std::to_string(n_windows));
    }
  }

  const std::string label_path = find_by_prefix(dirs, "y_");
  std::ifstream ls(label_path);
  if (!ls) throw DataError("cannot open '" + label_path + "'");
  std::vector<int> activities;
  std::string line;
  while (std::getline(ls, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const int64_t a = parse_int(t, label_path);
    if (a < 1 || a > 6) throw DataError("activity label " + t + " out of range 1..6 in '" + label_path + "'");
    activities.push_back(static_cast<int>(a));
  }
  if (activities.size() != n_windows) {
    throw DataError("label file '" + label_path + "' has " + std::to_string(activities.size()) +
                    " rows but the signals have " + std::to_string(n_windows));
  }

  std::vector<TimeSeriesWindow> windows(n_windows);
  for (size_t w = 0; w < n_windows; ++w) {
    TimeSeriesWindow& win = windows[w];
    win.values = Tensor<double>(kHarWindowLength, kHarChannelCount);
    for (int64_t c = 0; c < kHarChannelCount; ++c) {
      const auto& row = signals[static_cast<size_t>(c)][w];
      for (int64_t t = 0; t < kHarWindowLength; ++t) win.values(t, c) = row[static_cast<size_t>(t)];
    }
    win.activity = activities[w];
    if (!win.values.all_finite()) {
      throw DataError("window " + std::to_string(w) + " holds non-finite values");
    }
  }
  return windows;
}

Tensor<double> recurrence_matrix(const Tensor<double>& series) {
  std::vector<double> s;
  if (series.cols() == 1) {
    for (int64_t i = 0; i < series.rows(); ++i) s.push_back(series(i, 0));
  } else if (series.rows() == 1) {
    for (int64_t j = 0; j < series.cols(); ++j) s.push_back(series(0, j));
  } else {
    throw DataError("recurrence_matrix takes a single-channel series; use recurrence_channels");
  }
  const int64_t n = static_cast<int64_t>(s.size());
  Tensor<double> r(n, n);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      r(i, j) = std::fabs(s[static_cast<size_t>(i)] - s[static_cast<size_t>(j)]);
    }
  }
  return r;
}

std::vector<Tensor<double>> recurrence_channels(const Tensor<double>& series) {
  std::vector<Tensor<double>> out;
  out.reserve(static_cast<size_t>(series.cols()));
  for (int64_t c = 0; c < series.cols(); ++c) {
    Tensor<double> col(series.rows(), 1);
    for (int64_t t = 0; t < series.rows(); ++t) col(t, 0) = series(t, c);
    out.push_back(recurrence_matrix(col));
  }
  return out;
}

Tensor<double> downsample_time(const Tensor<double>& series, int64_t factor) {
  if (factor < 1) throw ConfigError("time downsample factor must be >= 1");
  if (series.rows() % factor != 0) {
    throw DataError("factor " + std::to_string(factor) + " does not divide the window length " +
                    std::to_string(series.rows()));
  }
  const int64_t out_t = series.rows() / factor;
  Tensor<double> out(out_t, series.cols());
  const double inv = 1.0 / static_cast<double>(factor);
  for (int64_t t = 0; t < out_t; ++t) {
    for (int64_t c = 0; c < series.cols(); ++c) {
      double acc = 0;
      for (int64_t dt = 0; dt < factor; ++dt) acc += series(t * factor + dt, c);
      out(t, c) = acc * inv;
    }
  }
  return out;
}

HarSplit har_anomaly_split(const std::vector<TimeSeriesWindow>& windows,
                           const HarSplitConfig& cfg) {
  if (windows.empty()) throw DataError("no windows to split");
  const int abnormal = har_activity_id(cfg.abnormal_activity);
  std::vector<int> channels = cfg.channels;
  if (channels.empty()) {
    for (int c = 0; c < windows.front().values.cols(); ++c) channels.push_back(c);
  }
  for (int c : channels) {
    if (c < 0 || c >= windows.front().values.cols()) {
      throw ConfigError("channel index " + std::to_string(c) + " out of range");
    }
  }

  // channel selection + optional time pooling, before any statistics
  std::vector<Tensor<double>> processed;
  processed.reserve(windows.size());
  for (const TimeSeriesWindow& w : windows) {
    if (w.values.rows() != windows.front().values.rows() ||
        w.values.cols() != windows.front().values.cols()) {
      throw DataError("windows disagree in shape");
    }
    Tensor<double> sel(w.values.rows(), static_cast<int64_t>(channels.size()));
    for (int64_t t = 0; t < w.values.rows(); ++t) {
      for (size_t c = 0; c < channels.size(); ++c) {
        sel(t, static_cast<int64_t>(c)) = w.values(t, channels[c]);
      }
    }
    processed.push_back(cfg.time_downsample > 1 ? downsample_time(sel, cfg.time_downsample)
                                                : std::move(sel));
  }

  std::vector<int64_t> normal_idx, abnormal_idx;
  for (size_t i = 0; i < windows.size(); ++i) {
    (windows[i].activity == abnormal ? abnormal_idx : normal_idx).push_back(static_cast<int64_t>(i));
  }
  if (normal_idx.empty()) throw DataError("no normal windows remain after leaving the activity out");
  if (abnormal_idx.empty()) throw DataError("no windows of the abnormal activity are present");
  RngStream rng(substream_seed(cfg.seed, "split"));
  rng.shuffle(normal_idx);
  const int64_t n_train = std::llround(0.8 * static_cast<double>(normal_idx.size()));

  // per-channel standardization fitted on the train windows only
  const int64_t n_ch = static_cast<int64_t>(channels.size());
  HarStandardization tf;
  tf.mean.assign(static_cast<size_t>(n_ch), 0.0);
  tf.sd.assign(static_cast<size_t>(n_ch), 1.0);
  {
    std::vector<double> sum(static_cast<size_t>(n_ch), 0.0), sq(static_cast<size_t>(n_ch), 0.0);
    int64_t count = 0;
    for (int64_t r = 0; r < n_train; ++r) {
      const Tensor<double>& w = processed[static_cast<size_t>(normal_idx[static_cast<size_t>(r)])];
      for (int64_t t = 0; t < w.rows(); ++t) {
        for (int64_t c = 0; c < n_ch; ++c) {
          sum[static_cast<size_t>(c)] += w(t, c);
          sq[static_cast<size_t>(c)] += w(t, c) * w(t, c);
        }
      }
      count += w.rows();
    }
    for (int64_t c = 0; c < n_ch; ++c) {
      const double mean = sum[static_cast<size_t>(c)] / static_cast<double>(count);
      const double var = sq[static_cast<size_t>(c)] / static_cast<double>(count) - mean * mean;
      tf.mean[static_cast<size_t>(c)] = mean;
      tf.sd[static_cast<size_t>(c)] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
  }

  auto represent = [&](const Tensor<double>& w) {
    Tensor<double> z(w.rows(), w.cols());
    for (int64_t t = 0; t < w.rows(); ++t) {
      for (int64_t c = 0; c < w.cols(); ++c) {
        z(t, c) = (w(t, c) - tf.mean[static_cast<size_t>(c)]) / tf.sd[static_cast<size_t>(c)];
      }
    }
    std::vector<double> flat;
    if (cfg.representation == HarRepresentation::raw) {
      flat.assign(z.data(), z.data() + z.numel());
    } else {
      for (const Tensor<double>& r : recurrence_channels(z)) {
        flat.insert(flat.end(), r.data(), r.data() + r.numel());
      }
    }
    return flat;
  };

  const std::string note = "har leave-out " + har_activity_names()[static_cast<size_t>(abnormal - 1)] +
                           (cfg.representation == HarRepresentation::raw ? " raw" : " recurrence");
  auto gather = [&](const std::vector<int64_t>& idx, const std::vector<int>& lab,
                    const std::string& split) {
    const std::vector<double> first = represent(processed[static_cast<size_t>(idx.front())]);
    LabeledDataset ds;
    ds.samples = Tensor<double>(static_cast<int64_t>(idx.size()), static_cast<int64_t>(first.size()));
    for (size_t r = 0; r < idx.size(); ++r) {
      const std::vector<double> flat =
          r == 0 ? first : represent(processed[static_cast<size_t>(idx[r])]);
      for (size_t j = 0; j < flat.size(); ++j) {
        ds.samples(static_cast<int64_t>(r), static_cast<int64_t>(j)) = flat[j];
      }
    }
    ds.labels = lab;
    ds.split = split;
    ds.provenance = note;
    ds.validate();
    return ds;
  };

  std::vector<int64_t> train_idx(normal_idx.begin(), normal_idx.begin() + n_train);
  std::vector<int64_t> test_idx(normal_idx.begin() + n_train, normal_idx.end());
  std::vector<int> test_labels(test_idx.size(), 0);
  test_idx.insert(test_idx.end(), abnormal_idx.begin(), abnormal_idx.end());
  test_labels.insert(test_labels.end(), abnormal_idx.size(), 1);

  HarSplit out;
  out.train = gather(train_idx, std::vector<int>(train_idx.size(), 0), "train");
  out.test = gather(test_idx, test_labels, "test");
  out.transform = std::move(tf);
  return out;
}

}  // namespace wgad
