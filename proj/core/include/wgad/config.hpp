#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wgad/datasets.hpp"
#include "wgad/latent.hpp"
#include "wgad/network.hpp"
#include "wgad/training.hpp"

namespace wgad {

// Flat INI-style document: "[section]" headers and "key = value" lines, with
// '#'/';' comments. Reads are tracked so a schema pass can reject any key the
// active configuration never consumed.
class ConfigDoc {
 public:
  static ConfigDoc from_text(std::string text);
  static ConfigDoc from_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& text() const { return text_; }

  std::string require(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int64_t> get_int_list(const std::string& key,
                                    const std::vector<int64_t>& fallback) const;

  // Throws naming the first key that no schema accessor ever touched.
  void reject_unknown() const;

 private:
  std::map<std::string, std::string> values_;
  std::string text_;
  mutable std::set<std::string> touched_;
};

struct RunBlock {
  std::string name = "run";
  uint64_t seed = 7;
  std::string out_dir = "out";
};

struct DatasetBlock {
  std::string kind;  // toy | idx | har

  // toy
  int64_t n = 100000;
  int64_t modes = 7;
  double radius = 1.0;
  double sigma = 0.05;
  double phase = 0.0;
  int64_t eval_normal = 1000;    // held-out normals scored at eval time
  int64_t eval_abnormal = 1000;  // density-labeled anomalies scored at eval time

  // idx
  std::string images, labels;    // primary IDX pair
  std::string images2, labels2;  // optional second pair, merged before splitting
  int abnormal_digit = 0;
  int64_t downsample = 1;
  int64_t train_cap = 0;  // 0 = use the whole train split

  // har
  std::string dir;
  std::string abnormal_activity = "laying";
  std::vector<int64_t> channels;  // empty = all nine
  std::string representation = "raw";
  int64_t time_downsample = 1;
};

struct ModelBlock {
  int64_t latent_dim = 2;
  std::vector<int64_t> gen_hidden = {128, 128};
  std::vector<int64_t> critic_hidden = {128, 128};
  std::vector<int64_t> enc_hidden = {128, 128};
  std::string hidden_act = "leaky_relu";
  std::string gen_out_act = "identity";
  bool gen_batchnorm = false;
};

struct TrainBlock {
  std::string variant = "wgan_gp";
  int64_t batch = 64;
  int64_t epochs = 30;
  int64_t n_critic = 5;
  double lambda_gp = 10.0;
  double clip = 0.01;
  double adam_lr = 1e-4, adam_beta1 = 0.5, adam_beta2 = 0.9;
  double rmsprop_lr = 5e-5;
  double divergence_guard = 1e6;
};

struct EncoderBlock {
  int64_t epochs = 30;
  int64_t batch = 64;
  double adam_lr = 1e-4, adam_beta1 = 0.5, adam_beta2 = 0.9;
};

struct ScorerBlock {
  std::string id = "encoder_mse";  // critic_interval | anogan | bigan | encoder_mse
  double lambda_mix = 0.5;
  double alpha_mix = 0.5;
  std::string recon = "squared_error";
};

struct InvertBlock {
  int64_t steps = 400;
  double step_size = 0.01;
  double lambda_prior = 0.1;
  int64_t restarts = 3;
};

struct ExperimentConfig {
  RunBlock run;
  DatasetBlock dataset;
  ModelBlock model;
  TrainBlock train;
  EncoderBlock encoder;
  ScorerBlock scorer;
  InvertBlock invert;
  std::string source_text;  // byte-identical snapshot of the parsed document

  static ExperimentConfig from_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

// Architecture and hyperparameter bridges; data_width is the flattened sample
// width of the active dataset.
NetworkSpec generator_spec(const ExperimentConfig& cfg, int64_t data_width);
NetworkSpec critic_spec(const ExperimentConfig& cfg, int64_t data_width);
NetworkSpec encoder_spec(const ExperimentConfig& cfg, int64_t data_width);
GanConfig gan_config(const ExperimentConfig& cfg);
EncoderConfig encoder_config(const ExperimentConfig& cfg);
InversionConfig inversion_config(const ExperimentConfig& cfg);
GaussianMixtureSpec toy_spec(const ExperimentConfig& cfg);

}  // namespace wgad
