#include "wgad/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "wgad/checkpoint.hpp"
#include "wgad/config.hpp"
#include "wgad/datasets.hpp"
#include "wgad/error.hpp"
#include "wgad/evaluation.hpp"
#include "wgad/latent.hpp"
#include "wgad/scoring.hpp"
#include "wgad/training.hpp"
#include "wgad/version.hpp"

namespace fs = std::filesystem;

namespace wgad {

namespace {

using nlohmann::json;

class WallClock {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << content;
  if (!os) throw DataError("failed writing '" + path.string() + "'");
}

// The manifest lands last and atomically: its presence marks a completed run.
void write_manifest(const fs::path& out_dir, json j, const WallClock& clock) {
  j["wall_ms"] = clock.ms();
  const fs::path tmp = out_dir / "manifest.json.tmp";
  write_text_file(tmp, j.dump(2) + "\n");
  fs::rename(tmp, out_dir / "manifest.json");
}

json base_manifest(const ExperimentConfig& cfg, const CliOptions& opts) {
  json j;
  j["command"] = opts.command;
  j["run_name"] = cfg.run.name;
  j["seed"] = cfg.run.seed;
  j["precision"] = opts.precision;
  j["library_version"] = std::string(version);
  j["config_text"] = cfg.source_text;
  j["outputs"] = json::object();
  j["metrics"] = json::object();
  return j;
}

std::string model_id(const ExperimentConfig& cfg) {
  return cfg.run.name + "-" + cfg.train.variant;
}

void cap_rows(LabeledDataset& ds, int64_t cap) {
  if (cap <= 0 || cap >= ds.size()) return;
  Tensor<double> kept(cap, ds.samples.cols());
  for (int64_t i = 0; i < cap; ++i) {
    for (int64_t j = 0; j < ds.samples.cols(); ++j) kept(i, j) = ds.samples(i, j);
  }
  ds.samples = std::move(kept);
  ds.labels.resize(static_cast<size_t>(cap));
  ds.validate();
}

// idx / har pipelines build both splits in one pass; the split is a pure
// function of (files, seed), so train and score commands agree on it.
std::pair<LabeledDataset, LabeledDataset> prepare_idx(const ExperimentConfig& cfg) {
  const DatasetBlock& d = cfg.dataset;
  IdxImages im = load_idx_images(d.images);
  std::vector<int> lab = load_idx_labels(d.labels);
  if (static_cast<size_t>(im.pixels.rows()) != lab.size()) {
    throw DataError("'" + d.images + "' and '" + d.labels + "' disagree on the sample count");
  }
  if (!d.images2.empty()) {
    IdxImages im2 = load_idx_images(d.images2);
    std::vector<int> lab2 = load_idx_labels(d.labels2);
    if (static_cast<size_t>(im2.pixels.rows()) != lab2.size()) {
      throw DataError("'" + d.images2 + "' and '" + d.labels2 + "' disagree on the sample count");
    }
    if (im2.rows != im.rows || im2.cols != im.cols) {
      throw DataError("the two IDX image files disagree on image dimensions");
    }
    Tensor<double> merged(im.pixels.rows() + im2.pixels.rows(), im.pixels.cols());
    for (int64_t i = 0; i < im.pixels.numel(); ++i) merged[i] = im.pixels[i];
    for (int64_t i = 0; i < im2.pixels.numel(); ++i) merged[im.pixels.numel() + i] = im2.pixels[i];
    im.pixels = std::move(merged);
    lab.insert(lab.end(), lab2.begin(), lab2.end());
  }
  Tensor<double> pixels = d.downsample > 1 ? downsample_images(im.pixels, d.downsample)
                                           : std::move(im.pixels);
  auto splits = leave_one_digit_out_split(pixels, lab, d.abnormal_digit, cfg.run.seed);
  cap_rows(splits.first, d.train_cap);
  return splits;
}

std::pair<LabeledDataset, LabeledDataset> prepare_har(const ExperimentConfig& cfg) {
  const DatasetBlock& d = cfg.dataset;
  HarSplitConfig hc;
  hc.abnormal_activity = d.abnormal_activity;
  for (int64_t c : d.channels) hc.channels.push_back(static_cast<int>(c));
  hc.representation = d.representation == "raw" ? HarRepresentation::raw
                                                : HarRepresentation::recurrence;
  hc.time_downsample = d.time_downsample;
  hc.seed = cfg.run.seed;
  HarSplit hs = har_anomaly_split(load_har(d.dir), hc);
  cap_rows(hs.train, d.train_cap);
  return {std::move(hs.train), std::move(hs.test)};
}

LabeledDataset prepare_train(const ExperimentConfig& cfg) {
  if (cfg.dataset.kind == "toy") {
    const GaussianMixtureSpec spec = toy_spec(cfg);
    LabeledDataset ds;
    ds.samples = sample_gaussian_mixture(spec, cfg.dataset.n);
    ds.labels.assign(static_cast<size_t>(cfg.dataset.n), 0);
    ds.split = "train";
    ds.provenance = "toy mixture";
    ds.validate();
    return ds;
  }
  if (cfg.dataset.kind == "idx") return prepare_idx(cfg).first;
  return prepare_har(cfg).first;
}

LabeledDataset prepare_test(const ExperimentConfig& cfg) {
  if (cfg.dataset.kind == "toy") {
    const GaussianMixtureSpec spec = toy_spec(cfg);
    // held-out normals come from an independent substream of the same mixture
    GaussianMixtureSpec eval_spec = spec;
    eval_spec.seed = substream_seed(cfg.run.seed, "toy-eval");
    const Tensor<double> normals = sample_gaussian_mixture(eval_spec, cfg.dataset.eval_normal);
    const Tensor<double> anomalies = sample_toy_anomalies(spec, cfg.dataset.eval_abnormal);
    LabeledDataset ds;
    ds.samples = Tensor<double>(normals.rows() + anomalies.rows(), 2);
    for (int64_t i = 0; i < normals.numel(); ++i) ds.samples[i] = normals[i];
    for (int64_t i = 0; i < anomalies.numel(); ++i) ds.samples[normals.numel() + i] = anomalies[i];
    ds.labels.assign(static_cast<size_t>(normals.rows()), 0);
    ds.labels.insert(ds.labels.end(), static_cast<size_t>(anomalies.rows()), 1);
    ds.split = "test";
    ds.provenance = "toy mixture + low-density anomalies";
    ds.validate();
    return ds;
  }
  if (cfg.dataset.kind == "idx") return prepare_idx(cfg).second;
  return prepare_har(cfg).second;
}

fs::path resolve(const std::string& flag, const fs::path& out_dir, const char* fallback) {
  return flag.empty() ? out_dir / fallback : fs::path(flag);
}

template <class T>
int run_train(const ExperimentConfig& cfg, const CliOptions& opts) {
  const WallClock clock;
  const fs::path out(cfg.run.out_dir);
  const LabeledDataset train = prepare_train(cfg);
  const int64_t width = train.samples.cols();

  GanTrainer<T> trainer(generator_spec(cfg, width), critic_spec(cfg, width), gan_config(cfg));
  TrainingLog log = trainer.train(train.samples);

  const fs::path gen_path = out / "gen.wgad";
  const fs::path critic_path = out / "critic.wgad";
  const fs::path log_path = out / "training_log.csv";
  save_store(gen_path.string(), trainer.generator_params());
  save_store(critic_path.string(), trainer.critic_params());
  std::ostringstream log_csv;
  log.to_csv(log_csv);
  write_text_file(log_path, log_csv.str());

  json j = base_manifest(cfg, opts);
  j["outputs"]["gen_checkpoint"] = gen_path.string();
  j["outputs"]["critic_checkpoint"] = critic_path.string();
  j["outputs"]["training_log"] = log_path.string();
  j["dataset"] = {{"kind", cfg.dataset.kind}, {"train_rows", train.size()}, {"width", width}};
  j["metrics"]["updates"] = log.rows.empty() ? 0 : log.rows.back().update_index;
  j["metrics"]["final_critic_loss"] = log.rows.empty() ? 0.0 : log.rows.back().critic_loss;
  j["metrics"]["final_gen_loss"] = log.rows.empty() ? 0.0 : log.rows.back().gen_loss;
  write_manifest(out, std::move(j), clock);
  return exit_ok;
}

template <class T>
int run_train_encoder(const ExperimentConfig& cfg, const CliOptions& opts) {
  const WallClock clock;
  const fs::path out(cfg.run.out_dir);
  const LabeledDataset train = prepare_train(cfg);
  const int64_t width = train.samples.cols();

  const NetworkSpec gspec = generator_spec(cfg, width);
  const fs::path gen_path = resolve(opts.gen_path, out, "gen.wgad");
  ParamStore<T> gen_params = load_store_for<T>(gspec, gen_path.string());

  EncoderBundle<T> bundle =
      train_encoder(train.samples, encoder_spec(cfg, width), gspec, gen_params, encoder_config(cfg));

  const fs::path enc_path = out / "enc.wgad";
  const fs::path log_path = out / "encoder_log.csv";
  save_store(enc_path.string(), bundle.enc_params);
  std::ostringstream log_csv;
  bundle.log.to_csv(log_csv);
  write_text_file(log_path, log_csv.str());

  json j = base_manifest(cfg, opts);
  j["outputs"]["encoder_checkpoint"] = enc_path.string();
  j["outputs"]["encoder_log"] = log_path.string();
  j["outputs"]["generator_checkpoint_used"] = gen_path.string();
  j["dataset"] = {{"kind", cfg.dataset.kind}, {"train_rows", train.size()}, {"width", width}};
  j["metrics"]["final_recon_loss"] = bundle.log.rows.empty() ? 0.0 : bundle.log.rows.back().gen_loss;
  write_manifest(out, std::move(j), clock);
  return exit_ok;
}

template <class T>
int run_score(const ExperimentConfig& cfg, const CliOptions& opts) {
  const WallClock clock;
  const fs::path out(cfg.run.out_dir);
  const LabeledDataset test = prepare_test(cfg);
  const int64_t width = test.samples.cols();
  Tensor<T> X = test.samples.cast<T>();

  const NetworkSpec gspec = generator_spec(cfg, width);
  const NetworkSpec cspec = critic_spec(cfg, width);
  const NetworkSpec espec = encoder_spec(cfg, width);

  auto load_gen = [&] { return load_store_for<T>(gspec, resolve(opts.gen_path, out, "gen.wgad").string()); };
  auto load_critic = [&] {
    return load_store_for<T>(cspec, resolve(opts.critic_path, out, "critic.wgad").string());
  };
  auto load_enc = [&] {
    return load_store_for<T>(espec, resolve(opts.encoder_path, out, "enc.wgad").string());
  };

  std::vector<double> scores;
  if (cfg.scorer.id == "critic_interval") {
    ParamStore<T> critic = load_critic();
    const LabeledDataset train = prepare_train(cfg);
    Tensor<T> train_x = train.samples.cast<T>();
    const CriticInterval interval = fit_critic_interval(cspec, critic, train_x);
    scores = critic_scores(cspec, critic, interval, X);
  } else if (cfg.scorer.id == "anogan") {
    ParamStore<T> gen = load_gen();
    ParamStore<T> critic = load_critic();
    scores = anogan_scores(gspec, gen, cspec, critic, X, inversion_config(cfg), cfg.scorer.lambda_mix);
  } else if (cfg.scorer.id == "bigan") {
    ParamStore<T> critic = load_critic();
    EncoderBundle<T> bundle{espec, load_enc(), gspec, load_gen(), {}};
    scores = bigan_style_scores(bundle, cspec, critic, X, cfg.scorer.alpha_mix);
  } else {  // encoder_mse
    EncoderBundle<T> bundle{espec, load_enc(), gspec, load_gen(), {}};
    scores = encoder_mse_scores(bundle, X);
  }

  const ScoreReport report = make_report(scores, test.labels, cfg.scorer.id, model_id(cfg));
  const fs::path scores_path = out / "scores.csv";
  std::ostringstream csv;
  report.to_csv(csv);
  write_text_file(scores_path, csv.str());

  json j = base_manifest(cfg, opts);
  j["outputs"]["scores"] = scores_path.string();
  j["dataset"] = {{"kind", cfg.dataset.kind}, {"test_rows", test.size()}, {"width", width}};
  j["metrics"]["samples_scored"] = static_cast<int64_t>(report.rows.size());
  j["metrics"]["scorer"] = cfg.scorer.id;
  write_manifest(out, std::move(j), clock);
  return exit_ok;
}

int run_eval(const ExperimentConfig& cfg, const CliOptions& opts) {
  const WallClock clock;
  const fs::path out(cfg.run.out_dir);
  const fs::path report_path = resolve(opts.report_path, out, "scores.csv");
  std::ifstream is(report_path);
  if (!is) throw DataError("cannot open score report '" + report_path.string() + "'");
  const ScoreReport report = ScoreReport::from_csv(is);

  const PRCurve curve = pr_curve(report);
  const LabeledBoxplots boxes = boxplot_by_label(report);

  const fs::path metrics_path = out / "metrics.csv";
  const fs::path svg_path = out / "pr_curve.svg";
  const fs::path box_path = out / "boxplot.csv";
  std::ostringstream metrics;
  write_metrics_csv(metrics, curve, report);
  write_text_file(metrics_path, metrics.str());
  write_text_file(svg_path, pr_curve_svg(curve));
  std::ostringstream boxes_csv;
  boxes.to_csv(boxes_csv);
  write_text_file(box_path, boxes_csv.str());

  json j = base_manifest(cfg, opts);
  j["outputs"]["metrics"] = metrics_path.string();
  j["outputs"]["pr_curve_svg"] = svg_path.string();
  j["outputs"]["boxplot"] = box_path.string();
  j["metrics"]["auprc"] = auprc(curve);
  int64_t positives = 0;
  for (const ScoreRow& r : report.rows) positives += r.label;
  j["metrics"]["prevalence"] =
      static_cast<double>(positives) / static_cast<double>(report.rows.size());
  write_manifest(out, std::move(j), clock);
  return exit_ok;
}

int run_gen_toy(const ExperimentConfig& cfg, const CliOptions& opts) {
  const WallClock clock;
  if (cfg.dataset.kind != "toy") throw ConfigError("gen-toy needs dataset.kind = toy");
  const fs::path out(cfg.run.out_dir);
  const GaussianMixtureSpec spec = toy_spec(cfg);
  const double threshold = toy_density_threshold(spec);

  LabeledDataset ds;
  ds.samples = sample_gaussian_mixture(spec, cfg.dataset.n);
  ds.labels = toy_anomaly_label(spec, ds.samples, threshold);
  ds.split = "toy";
  ds.provenance = "toy mixture";
  ds.validate();

  const fs::path csv_path = out / "toy.csv";
  std::ostringstream csv;
  dataset_to_csv(ds, csv);
  write_text_file(csv_path, csv.str());
  const fs::path thr_path = out / "threshold.txt";
  write_text_file(thr_path, "density_threshold = " + format_double(threshold) + "\n");

  json j = base_manifest(cfg, opts);
  j["outputs"]["dataset"] = csv_path.string();
  j["outputs"]["threshold"] = thr_path.string();
  j["metrics"]["density_threshold"] = threshold;
  j["metrics"]["rows"] = ds.size();
  write_manifest(out, std::move(j), clock);
  return exit_ok;
}

template <class T>
int run_invert(const ExperimentConfig& cfg, const CliOptions& opts) {
  const WallClock clock;
  if (opts.input_path.empty()) throw ConfigError("invert needs --input pointing at a dataset CSV");
  const fs::path out(cfg.run.out_dir);

  std::ifstream is(opts.input_path);
  if (!is) throw DataError("cannot open '" + opts.input_path + "'");
  const LabeledDataset targets = dataset_from_csv(is, "input", opts.input_path);

  const NetworkSpec gspec = generator_spec(cfg, targets.samples.cols());
  ParamStore<T> gen_params =
      load_store_for<T>(gspec, resolve(opts.gen_path, out, "gen.wgad").string());
  Tensor<T> X = targets.samples.cast<T>();
  const InversionResult<T> res = invert_generator(gspec, gen_params, X, inversion_config(cfg));

  std::ostringstream csv;
  csv << "sample_id,label,objective,recon_loss";
  for (int64_t j = 0; j < res.z.cols(); ++j) csv << ",z" << j;
  csv << "\n";
  for (int64_t i = 0; i < res.z.rows(); ++i) {
    csv << i << "," << targets.labels[static_cast<size_t>(i)] << ","
        << format_double(res.objective[static_cast<size_t>(i)]) << ","
        << format_double(res.recon_loss[static_cast<size_t>(i)]);
    for (int64_t j = 0; j < res.z.cols(); ++j) {
      csv << "," << format_double(static_cast<double>(res.z(i, j)));
    }
    csv << "\n";
  }
  const fs::path inv_path = out / "inversions.csv";
  write_text_file(inv_path, csv.str());

  json j = base_manifest(cfg, opts);
  j["outputs"]["inversions"] = inv_path.string();
  j["metrics"]["rows"] = res.z.rows();
  write_manifest(out, std::move(j), clock);
  return exit_ok;
}

template <class T>
int dispatch(const ExperimentConfig& cfg, const CliOptions& opts) {
  if (opts.command == "train") return run_train<T>(cfg, opts);
  if (opts.command == "train-encoder") return run_train_encoder<T>(cfg, opts);
  if (opts.command == "score") return run_score<T>(cfg, opts);
  if (opts.command == "invert") return run_invert<T>(cfg, opts);
  throw ConfigError("unknown command '" + opts.command + "'");
}

}  // namespace

int run_command(const CliOptions& opts) {
  try {
    if (opts.precision != "f32" && opts.precision != "f64") {
      throw ConfigError("--precision must be f32 or f64, got '" + opts.precision + "'");
    }
    if (opts.config_path.empty()) throw ConfigError("--config is required");
    ExperimentConfig cfg = ExperimentConfig::from_file(opts.config_path);
    if (opts.has_seed) cfg.run.seed = opts.seed;
    if (!opts.out_dir.empty()) cfg.run.out_dir = opts.out_dir;
    fs::create_directories(cfg.run.out_dir);

    if (opts.command == "eval") return run_eval(cfg, opts);
    if (opts.command == "gen-toy") return run_gen_toy(cfg, opts);
    return opts.precision == "f32" ? dispatch<float>(cfg, opts) : dispatch<double>(cfg, opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return exit_diverged;
  } catch (const ChecksumError& e) {
    std::cerr << "checksum error: " << e.what() << "\n";
    return exit_checksum;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace wgad
