#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wgad/commands.hpp"
#include "wgad/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein GAN anomaly detection: train, invert, score, evaluate"};
  app.set_version_flag("--version", std::string(wgad::version));
  app.require_subcommand(1);

  wgad::CliOptions opts;

  struct SubEntry {
    CLI::App* sub = nullptr;
    CLI::Option* seed = nullptr;
  };
  std::vector<std::pair<std::string, SubEntry>> subs;

  auto add_sub = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", opts.config_path, "experiment config file (INI)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory (overrides run.out_dir)");
    CLI::Option* seed = sub->add_option("--seed", opts.seed, "seed (overrides run.seed)");
    sub->add_option("--precision", opts.precision, "numeric precision")
        ->check(CLI::IsMember({"f32", "f64"}));
    subs.emplace_back(name, SubEntry{sub, seed});
    return sub;
  };

  add_sub("train", "train a generator/critic pair per the config");
  CLI::App* train_enc = add_sub("train-encoder", "train a post-hoc encoder against a frozen generator");
  train_enc->add_option("--gen", opts.gen_path, "generator checkpoint (default <out>/gen.wgad)");
  CLI::App* score = add_sub("score", "score the test split with the configured scorer");
  score->add_option("--gen", opts.gen_path, "generator checkpoint");
  score->add_option("--critic", opts.critic_path, "critic checkpoint");
  score->add_option("--encoder", opts.encoder_path, "encoder checkpoint");
  CLI::App* eval = add_sub("eval", "turn a score report into PR metrics, SVG, and boxplots");
  eval->add_option("--report", opts.report_path, "score report CSV (default <out>/scores.csv)");
  add_sub("gen-toy", "write the seeded toy dataset and its density threshold");
  CLI::App* invert = add_sub("invert", "recover latent codes for given samples by gradient descent");
  invert->add_option("--gen", opts.gen_path, "generator checkpoint");
  invert->add_option("--input", opts.input_path, "dataset CSV of target samples");

  CLI11_PARSE(app, argc, argv);

  for (const auto& [name, entry] : subs) {
    if (entry.sub->parsed()) {
      opts.command = name;
      opts.has_seed = entry.seed->count() > 0;
      return wgad::run_command(opts);
    }
  }
  return 1;  // unreachable: require_subcommand(1)
}
