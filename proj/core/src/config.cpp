#include "wgad/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "wgad/error.hpp"
#include "wgad/text.hpp"

namespace wgad {

ConfigDoc ConfigDoc::from_text(std::string text) {
  ConfigDoc doc;
  doc.text_ = std::move(text);
  std::istringstream is(doc.text_);
  std::string line, section;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header " + t);
      }
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      }
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got " + t);
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key +
                        "' appears before any [section]");
    }
    const std::string full = section + "." + key;
    if (!doc.values_.emplace(full, value).second) {
      throw ConfigError("duplicate key '" + full + "'");
    }
  }
  return doc;
}

ConfigDoc ConfigDoc::from_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return from_text(buf.str());
}

std::string ConfigDoc::require(const std::string& key) const {
  touched_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

std::string ConfigDoc::get(const std::string& key, const std::string& fallback) const {
  touched_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int64_t ConfigDoc::get_int(const std::string& key, int64_t fallback) const {
  touched_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_int(it->second, key);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

uint64_t ConfigDoc::get_u64(const std::string& key, uint64_t fallback) const {
  touched_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  uint64_t v = 0;
  const std::string& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("key '" + key + "' is not an unsigned integer: " + s);
  }
  return v;
}

double ConfigDoc::get_double(const std::string& key, double fallback) const {
  touched_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_double(it->second, key);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

bool ConfigDoc::get_bool(const std::string& key, bool fallback) const {
  touched_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("key '" + key + "' is not a boolean: " + s);
}

std::vector<int64_t> ConfigDoc::get_int_list(const std::string& key,
                                             const std::vector<int64_t>& fallback) const {
  touched_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int64_t> out;
  for (const std::string& tok : split(it->second, ',')) {
    const std::string t = trim(tok);
    if (t.empty()) throw ConfigError("key '" + key + "' holds an empty list entry");
    try {
      out.push_back(parse_int(t, key));
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

void ConfigDoc::reject_unknown() const {
  for (const auto& [key, value] : values_) {
    if (touched_.count(key) == 0) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

namespace {

void check_choice(const std::string& key, const std::string& value,
                  const std::vector<std::string>& allowed) {
  for (const std::string& a : allowed) {
    if (value == a) return;
  }
  std::string opts;
  for (const std::string& a : allowed) opts += (opts.empty() ? "" : "|") + a;
  throw ConfigError("config key '" + key + "' must be one of " + opts + ", got '" + value + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ConfigDoc doc = ConfigDoc::from_text(text);
  ExperimentConfig cfg;
  cfg.source_text = doc.text();

  cfg.run.name = doc.get("run.name", cfg.run.name);
  cfg.run.seed = doc.get_u64("run.seed", cfg.run.seed);
  cfg.run.out_dir = doc.get("run.out_dir", cfg.run.out_dir);

  DatasetBlock& d = cfg.dataset;
  d.kind = doc.require("dataset.kind");
  check_choice("dataset.kind", d.kind, {"toy", "idx", "har"});
  if (d.kind == "toy") {
    d.n = doc.get_int("dataset.n", d.n);
    d.modes = doc.get_int("dataset.modes", d.modes);
    d.radius = doc.get_double("dataset.radius", d.radius);
    d.sigma = doc.get_double("dataset.sigma", d.sigma);
    d.phase = doc.get_double("dataset.phase", d.phase);
    d.eval_normal = doc.get_int("dataset.eval_normal", d.eval_normal);
    d.eval_abnormal = doc.get_int("dataset.eval_abnormal", d.eval_abnormal);
    if (d.n < 1) throw ConfigError("dataset.n must be >= 1");
    if (d.eval_normal < 1 || d.eval_abnormal < 1) {
      throw ConfigError("toy evaluation sample counts must be >= 1");
    }
  } else if (d.kind == "idx") {
    d.images = doc.require("dataset.images");
    d.labels = doc.require("dataset.labels");
    d.images2 = doc.get("dataset.images2", "");
    d.labels2 = doc.get("dataset.labels2", "");
    if (d.images2.empty() != d.labels2.empty()) {
      throw ConfigError("dataset.images2 and dataset.labels2 must be given together");
    }
    d.abnormal_digit = static_cast<int>(doc.get_int("dataset.abnormal_digit", d.abnormal_digit));
    d.downsample = doc.get_int("dataset.downsample", d.downsample);
    d.train_cap = doc.get_int("dataset.train_cap", d.train_cap);
    if (d.abnormal_digit < 0 || d.abnormal_digit > 9) {
      throw ConfigError("dataset.abnormal_digit must lie in 0..9");
    }
    if (d.downsample < 1) throw ConfigError("dataset.downsample must be >= 1");
    if (d.train_cap < 0) throw ConfigError("dataset.train_cap must be >= 0");
  } else {
    d.dir = doc.require("dataset.dir");
    d.abnormal_activity = doc.get("dataset.abnormal_activity", d.abnormal_activity);
    d.channels = doc.get_int_list("dataset.channels", d.channels);
    d.representation = doc.get("dataset.representation", d.representation);
    d.time_downsample = doc.get_int("dataset.time_downsample", d.time_downsample);
    d.train_cap = doc.get_int("dataset.train_cap", d.train_cap);
    check_choice("dataset.representation", d.representation, {"raw", "recurrence"});
    if (d.time_downsample < 1) throw ConfigError("dataset.time_downsample must be >= 1");
    if (d.train_cap < 0) throw ConfigError("dataset.train_cap must be >= 0");
  }

  ModelBlock& m = cfg.model;
  m.latent_dim = doc.get_int("model.latent_dim", m.latent_dim);
  m.gen_hidden = doc.get_int_list("model.gen_hidden", m.gen_hidden);
  m.critic_hidden = doc.get_int_list("model.critic_hidden", m.critic_hidden);
  m.enc_hidden = doc.get_int_list("model.enc_hidden", m.enc_hidden);
  m.hidden_act = doc.get("model.hidden_act", m.hidden_act);
  m.gen_out_act = doc.get("model.gen_out_act", m.gen_out_act);
  m.gen_batchnorm = doc.get_bool("model.gen_batchnorm", m.gen_batchnorm);
  act_from_name(m.hidden_act);   // validity check
  act_from_name(m.gen_out_act);
  if (m.latent_dim < 1) throw ConfigError("model.latent_dim must be >= 1");

  TrainBlock& t = cfg.train;
  t.variant = doc.get("train.variant", t.variant);
  variant_from_name(t.variant);
  t.batch = doc.get_int("train.batch", t.batch);
  t.epochs = doc.get_int("train.epochs", t.epochs);
  t.n_critic = doc.get_int("train.n_critic", t.n_critic);
  t.lambda_gp = doc.get_double("train.lambda_gp", t.lambda_gp);
  t.clip = doc.get_double("train.clip", t.clip);
  t.adam_lr = doc.get_double("train.adam_lr", t.adam_lr);
  t.adam_beta1 = doc.get_double("train.adam_beta1", t.adam_beta1);
  t.adam_beta2 = doc.get_double("train.adam_beta2", t.adam_beta2);
  t.rmsprop_lr = doc.get_double("train.rmsprop_lr", t.rmsprop_lr);
  t.divergence_guard = doc.get_double("train.divergence_guard", t.divergence_guard);

  EncoderBlock& e = cfg.encoder;
  e.epochs = doc.get_int("encoder.epochs", e.epochs);
  e.batch = doc.get_int("encoder.batch", e.batch);
  e.adam_lr = doc.get_double("encoder.adam_lr", e.adam_lr);
  e.adam_beta1 = doc.get_double("encoder.adam_beta1", e.adam_beta1);
  e.adam_beta2 = doc.get_double("encoder.adam_beta2", e.adam_beta2);

  ScorerBlock& s = cfg.scorer;
  s.id = doc.get("scorer.id", s.id);
  check_choice("scorer.id", s.id, {"critic_interval", "anogan", "bigan", "encoder_mse"});
  s.lambda_mix = doc.get_double("scorer.lambda_mix", s.lambda_mix);
  s.alpha_mix = doc.get_double("scorer.alpha_mix", s.alpha_mix);
  s.recon = doc.get("scorer.recon", s.recon);
  recon_from_name(s.recon);
  if (s.lambda_mix < 0 || s.lambda_mix > 1) throw ConfigError("scorer.lambda_mix must lie in [0,1]");
  if (s.alpha_mix < 0 || s.alpha_mix > 1) throw ConfigError("scorer.alpha_mix must lie in [0,1]");

  InvertBlock& iv = cfg.invert;
  iv.steps = doc.get_int("invert.steps", iv.steps);
  iv.step_size = doc.get_double("invert.step_size", iv.step_size);
  iv.lambda_prior = doc.get_double("invert.lambda_prior", iv.lambda_prior);
  iv.restarts = doc.get_int("invert.restarts", iv.restarts);

  doc.reject_unknown();

  // construct the derived objects once so their own validation runs up front
  gan_config(cfg);
  encoder_config(cfg);
  inversion_config(cfg);
  if (d.kind == "toy") toy_spec(cfg);
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return from_text(buf.str());
}

namespace {

std::vector<int64_t> chain(int64_t first, const std::vector<int64_t>& hidden, int64_t last) {
  std::vector<int64_t> widths;
  widths.push_back(first);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(last);
  return widths;
}

}  // namespace

NetworkSpec generator_spec(const ExperimentConfig& cfg, int64_t data_width) {
  return NetworkSpec::dense(chain(cfg.model.latent_dim, cfg.model.gen_hidden, data_width),
                            act_from_name(cfg.model.hidden_act),
                            act_from_name(cfg.model.gen_out_act), cfg.model.gen_batchnorm,
                            /*terminal_bn=*/false);
}

NetworkSpec critic_spec(const ExperimentConfig& cfg, int64_t data_width) {
  // sigmoid head only for the standard GAN; Wasserstein critics stay linear
  const Act out = cfg.train.variant == "gan" ? Act::sigmoid_fn : Act::identity;
  return NetworkSpec::dense(chain(data_width, cfg.model.critic_hidden, 1),
                            act_from_name(cfg.model.hidden_act), out,
                            /*hidden_bn=*/false, /*terminal_bn=*/false);
}

NetworkSpec encoder_spec(const ExperimentConfig& cfg, int64_t data_width) {
  // terminal batch norm keeps the predicted codes near the latent prior
  return NetworkSpec::dense(chain(data_width, cfg.model.enc_hidden, cfg.model.latent_dim),
                            act_from_name(cfg.model.hidden_act), Act::identity,
                            /*hidden_bn=*/false, /*terminal_bn=*/true);
}

GanConfig gan_config(const ExperimentConfig& cfg) {
  GanConfig g;
  g.variant = variant_from_name(cfg.train.variant);
  g.batch = cfg.train.batch;
  g.n_critic = cfg.train.n_critic;
  g.epochs = cfg.train.epochs;
  g.latent_dim = cfg.model.latent_dim;
  g.lambda_gp = cfg.train.lambda_gp;
  g.clip = cfg.train.clip;
  g.adam.lr = cfg.train.adam_lr;
  g.adam.beta1 = cfg.train.adam_beta1;
  g.adam.beta2 = cfg.train.adam_beta2;
  g.rmsprop.lr = cfg.train.rmsprop_lr;
  g.seed = cfg.run.seed;
  g.divergence_guard = cfg.train.divergence_guard;
  g.validate();
  return g;
}

EncoderConfig encoder_config(const ExperimentConfig& cfg) {
  EncoderConfig e;
  e.epochs = cfg.encoder.epochs;
  e.batch = cfg.encoder.batch;
  e.adam.lr = cfg.encoder.adam_lr;
  e.adam.beta1 = cfg.encoder.adam_beta1;
  e.adam.beta2 = cfg.encoder.adam_beta2;
  e.seed = cfg.run.seed;
  e.divergence_guard = cfg.train.divergence_guard;
  e.validate();
  return e;
}

InversionConfig inversion_config(const ExperimentConfig& cfg) {
  InversionConfig iv;
  iv.steps = cfg.invert.steps;
  iv.step_size = cfg.invert.step_size;
  iv.lambda_prior = cfg.invert.lambda_prior;
  iv.restarts = cfg.invert.restarts;
  iv.recon = recon_from_name(cfg.scorer.recon);
  iv.seed = cfg.run.seed;
  iv.validate();
  return iv;
}

GaussianMixtureSpec toy_spec(const ExperimentConfig& cfg) {
  GaussianMixtureSpec spec;
  spec.k = cfg.dataset.modes;
  spec.radius = cfg.dataset.radius;
  spec.sigma = cfg.dataset.sigma;
  spec.phase = cfg.dataset.phase;
  spec.seed = cfg.run.seed;
  spec.validate();
  return spec;
}

}  // namespace wgad
