#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "wgad/commands.hpp"
#include "wgad/error.hpp"

using namespace wgad;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path sandbox() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "wgad_commands_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string write_config(const std::string& name, const std::string& text) {
  const fs::path p = sandbox() / name;
  std::ofstream os(p, std::ios::binary);
  os << text;
  return p.string();
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE_MESSAGE(is.good(), "missing ", p.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

int64_t count_lines(const std::string& text) {
  int64_t n = 0;
  for (char ch : text) n += ch == '\n';
  return n;
}

json read_manifest(const fs::path& out_dir) {
  return json::parse(read_file(out_dir / "manifest.json"));
}

CliOptions make(const std::string& command, const std::string& config, const std::string& out) {
  CliOptions o;
  o.command = command;
  o.config_path = config;
  o.out_dir = out;
  o.precision = "f64";
  return o;
}

// run_command reports failures on stderr; capture it so failing-path cases
// stay quiet and the emitted message can be inspected.
struct CerrCapture {
  CerrCapture() : old(std::cerr.rdbuf(buffer.rdbuf())) {}
  ~CerrCapture() { std::cerr.rdbuf(old); }
  std::string text() const { return buffer.str(); }
  std::ostringstream buffer;
  std::streambuf* old;
};

const char* kToyConfig =
    "[run]\nname = demo\nseed = 5\nout_dir = should-be-overridden\n"
    "[dataset]\nkind = toy\nn = 256\nmodes = 3\neval_normal = 25\neval_abnormal = 25\n"
    "[model]\nlatent_dim = 2\ngen_hidden = 8\ncritic_hidden = 8\nenc_hidden = 8\n"
    "[train]\nbatch = 32\nepochs = 1\nn_critic = 2\n"
    "[encoder]\nepochs = 2\n"
    "[invert]\nsteps = 10\nrestarts = 1\nstep_size = 0.05\n";

std::string toy_config() {
  static std::string path = write_config("toy.ini", kToyConfig);
  return path;
}

// Trains the tiny toy models (seed 77) once; every case needing checkpoints
// reuses these artifacts, so cases stay independent of execution order.
const fs::path& trained_dir() {
  static fs::path out = [] {
    fs::path p = sandbox() / "models";
    CliOptions opts = make("train", toy_config(), p.string());
    opts.has_seed = true;
    opts.seed = 77;
    if (run_command(opts) != 0) throw std::runtime_error("fixture GAN training failed");
    opts.command = "train-encoder";
    if (run_command(opts) != 0) throw std::runtime_error("fixture encoder training failed");
    return p;
  }();
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("commands");

TEST_CASE("train writes checkpoints, a log, and the manifest") {
  const fs::path out = sandbox() / "train_case";
  CliOptions opts = make("train", toy_config(), out.string());
  opts.has_seed = true;
  opts.seed = 77;
  REQUIRE(run_command(opts) == 0);

  CHECK(fs::exists(out / "gen.wgad"));
  CHECK(fs::exists(out / "critic.wgad"));
  CHECK(fs::exists(out / "training_log.csv"));
  const json m = read_manifest(out);
  CHECK(m["command"] == "train");
  CHECK(m["seed"] == 77);  // --seed wins over run.seed
  CHECK(m["precision"] == "f64");
  CHECK(m["config_text"] == std::string(kToyConfig));
  CHECK(m["dataset"]["kind"] == "toy");
  CHECK(m["dataset"]["train_rows"] == 256);
  // 1 epoch * floor(256/32) generator steps * 2 critic updates each
  CHECK(m["metrics"]["updates"] == 16);
  CHECK(m.contains("wall_ms"));
  CHECK(fs::exists(fs::path(m["outputs"]["gen_checkpoint"].get<std::string>())));

  const std::string log = read_file(out / "training_log.csv");
  CHECK(log.rfind("update_index,epoch,critic_loss,penalty,gen_loss,wall_ms", 0) == 0);
  CHECK(count_lines(log) == 1 + 16);
}

TEST_CASE("training is reproducible for a fixed seed and differs across seeds") {
  const fs::path b = sandbox() / "repro_b";
  const fs::path c = sandbox() / "repro_c";
  CliOptions opts = make("train", toy_config(), b.string());
  opts.has_seed = true;
  opts.seed = 77;
  REQUIRE(run_command(opts) == 0);
  opts.out_dir = c.string();
  opts.seed = 6;
  REQUIRE(run_command(opts) == 0);

  CHECK(read_file(trained_dir() / "gen.wgad") == read_file(b / "gen.wgad"));
  CHECK(read_file(trained_dir() / "critic.wgad") == read_file(b / "critic.wgad"));
  CHECK(read_file(b / "gen.wgad") != read_file(c / "gen.wgad"));
}

TEST_CASE("train-encoder resolves the generator checkpoint and writes its own") {
  const fs::path& out = trained_dir();
  CHECK(fs::exists(out / "enc.wgad"));
  CHECK(fs::exists(out / "encoder_log.csv"));
  // the fixture's encoder run wrote the directory's manifest last
  const json m = read_manifest(out);
  CHECK(m["command"] == "train-encoder");
  CHECK(m["outputs"]["generator_checkpoint_used"] == (out / "gen.wgad").string());
  CHECK(m["outputs"]["encoder_checkpoint"] == (out / "enc.wgad").string());
}

TEST_CASE("every scorer produces a full report over the test split") {
  const fs::path models = trained_dir();
  for (const std::string scorer : {"critic_interval", "encoder_mse", "bigan", "anogan"}) {
    CAPTURE(scorer);
    const std::string cfg = write_config(
        "score_" + scorer + ".ini", std::string(kToyConfig) + "[scorer]\nid = " + scorer + "\n");
    const fs::path out = sandbox() / ("score_" + scorer);
    CliOptions opts = make("score", cfg, out.string());
    opts.has_seed = true;
    opts.seed = 77;  // the split and the checkpoints must agree on the seed
    opts.gen_path = (models / "gen.wgad").string();
    opts.critic_path = (models / "critic.wgad").string();
    opts.encoder_path = (models / "enc.wgad").string();
    REQUIRE(run_command(opts) == 0);

    const std::string csv = read_file(out / "scores.csv");
    CHECK(csv.rfind("sample_id,score,label,scorer,model", 0) == 0);
    CHECK(csv.find(scorer) != std::string::npos);
    CHECK(count_lines(csv) == 1 + 25 + 25);  // header + eval_normal + eval_abnormal
    const json m = read_manifest(out);
    CHECK(m["metrics"]["samples_scored"] == 50);
    CHECK(m["metrics"]["scorer"] == scorer);
  }
}

TEST_CASE("eval turns a report into exactly three artifacts plus the manifest") {
  const fs::path report = sandbox() / "hand_scores.csv";
  {
    std::ofstream os(report);
    os << "sample_id,score,label,scorer,model\n"
          "0,0.9,1,manual,m\n"
          "1,0.8,1,manual,m\n"
          "2,0.7,0,manual,m\n"
          "3,0.1,0,manual,m\n";
  }
  const fs::path out = sandbox() / "eval";
  CliOptions opts = make("eval", toy_config(), out.string());
  opts.report_path = report.string();
  REQUIRE(run_command(opts) == 0);

  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(out)) names.insert(e.path().filename().string());
  CHECK(names ==
        std::set<std::string>({"metrics.csv", "pr_curve.svg", "boxplot.csv", "manifest.json"}));
  const json m = read_manifest(out);
  // the two anomalies rank strictly above every normal point
  CHECK(m["metrics"]["auprc"].get<double>() == doctest::Approx(1.0));
  CHECK(m["metrics"]["prevalence"].get<double>() == doctest::Approx(0.5));
  CHECK(read_file(out / "metrics.csv").find("auprc,") != std::string::npos);
  CHECK(read_file(out / "pr_curve.svg").rfind("<svg", 0) == 0);
  CHECK(read_file(out / "boxplot.csv").rfind("group,min,q1,median,q3,max,count", 0) == 0);

  CerrCapture quiet;
  CliOptions missing = make("eval", toy_config(), (sandbox() / "eval2").string());
  missing.report_path = (sandbox() / "nope.csv").string();
  CHECK(run_command(missing) == 3);
}

TEST_CASE("gen-toy writes the labeled sample and its density threshold") {
  const std::string cfg =
      write_config("gentoy.ini", "[run]\nseed = 11\n[dataset]\nkind = toy\nn = 500\nmodes = 3\n");
  const fs::path out = sandbox() / "gentoy";
  REQUIRE(run_command(make("gen-toy", cfg, out.string())) == 0);
  const std::string csv = read_file(out / "toy.csv");
  CHECK(csv.rfind("label,f0,f1", 0) == 0);
  CHECK(count_lines(csv) == 501);
  CHECK(read_file(out / "threshold.txt").rfind("density_threshold = ", 0) == 0);
  CHECK(read_manifest(out)["metrics"]["rows"] == 500);

  // gen-toy is only meaningful for the synthetic mixture
  const std::string idx_cfg =
      write_config("gentoy_idx.ini", "[dataset]\nkind = idx\nimages = a\nlabels = b\n");
  CerrCapture quiet;
  CHECK(run_command(make("gen-toy", idx_cfg, (sandbox() / "gentoy2").string())) == 2);
}

TEST_CASE("invert recovers codes for an input CSV against the trained generator") {
  const fs::path out = sandbox() / "invert";
  const fs::path input = sandbox() / "targets.csv";
  {
    std::ofstream os(input);
    os << "label,f0,f1\n0,1.0,0.0\n1,0.0,0.0\n0,-0.5,0.8\n";
  }
  CliOptions opts = make("invert", toy_config(), out.string());
  opts.input_path = input.string();
  opts.gen_path = (trained_dir() / "gen.wgad").string();
  REQUIRE(run_command(opts) == 0);

  const std::string csv = read_file(out / "inversions.csv");
  CHECK(csv.rfind("sample_id,label,objective,recon_loss,z0,z1", 0) == 0);
  CHECK(count_lines(csv) == 4);
  CHECK(read_manifest(out)["metrics"]["rows"] == 3);

  CerrCapture quiet;
  CliOptions no_input = make("invert", toy_config(), (sandbox() / "invert2").string());
  no_input.gen_path = opts.gen_path;
  CHECK(run_command(no_input) == 2);
  CHECK(quiet.text().find("--input") != std::string::npos);
}

TEST_CASE("failures map onto the stable exit codes") {
  CHECK(exit_ok == 0);
  CHECK(exit_failure == 1);
  CHECK(exit_config == 2);
  CHECK(exit_data == 3);
  CHECK(exit_diverged == 4);
  CHECK(exit_checksum == 5);

  CerrCapture quiet;

  SUBCASE("a missing --config flag is a configuration error") {
    CHECK(run_command(make("train", "", (sandbox() / "err").string())) == 2);
  }
  SUBCASE("an unreadable config file is a configuration error") {
    CHECK(run_command(make("train", (sandbox() / "nope.ini").string(),
                           (sandbox() / "err").string())) == 2);
  }
  SUBCASE("an unknown precision is rejected up front") {
    CliOptions opts = make("train", toy_config(), (sandbox() / "err").string());
    opts.precision = "f16";
    CHECK(run_command(opts) == 2);
  }
  SUBCASE("an unknown command is a configuration error") {
    CHECK(run_command(make("frobnicate", toy_config(), (sandbox() / "err").string())) == 2);
  }
  SUBCASE("a missing dataset file is a data error naming the path") {
    const std::string cfg = write_config(
        "missing_idx.ini",
        "[dataset]\nkind = idx\nimages = /nonexistent/images.idx\nlabels = /nonexistent/l.idx\n");
    CHECK(run_command(make("train", cfg, (sandbox() / "err").string())) == 3);
    CHECK(quiet.text().find("/nonexistent/images.idx") != std::string::npos);
  }
  SUBCASE("a corrupted checkpoint is a checksum error") {
    std::string bytes = read_file(trained_dir() / "gen.wgad");
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
    const fs::path bad = sandbox() / "gen_corrupt.wgad";
    {
      std::ofstream os(bad, std::ios::binary);
      os << bytes;
    }
    CliOptions opts = make("train-encoder", toy_config(), (sandbox() / "err").string());
    opts.has_seed = true;
    opts.seed = 77;
    opts.gen_path = bad.string();
    CHECK(run_command(opts) == 5);
  }
  SUBCASE("a checkpoint for a different architecture is a configuration error") {
    std::string text(kToyConfig);
    const std::string from = "gen_hidden = 8";
    text.replace(text.find(from), from.size(), "gen_hidden = 16");
    const std::string wider = write_config("wider_arch.ini", text);
    CliOptions opts = make("train-encoder", wider, (sandbox() / "err").string());
    opts.has_seed = true;
    opts.seed = 77;
    opts.gen_path = (trained_dir() / "gen.wgad").string();
    CHECK(run_command(opts) == 2);
  }
  SUBCASE("a divergence guard violation surfaces as exit 4") {
    std::string text(kToyConfig);
    const std::string from = "[train]\n";
    text.replace(text.find(from), from.size(), "[train]\ndivergence_guard = 1e-300\n");
    const std::string cfg = write_config("diverge.ini", text);
    CHECK(run_command(make("train", cfg, (sandbox() / "err").string())) == 4);
  }
}

TEST_SUITE_END();
