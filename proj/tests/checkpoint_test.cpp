#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "wgad/checkpoint.hpp"
#include "wgad/error.hpp"
#include "wgad/network.hpp"
#include "wgad/rng.hpp"
#include "wgad/tensor.hpp"

using namespace wgad;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

std::vector<uint8_t> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_all(const std::filesystem::path& p, const std::vector<uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE_BEGIN("checkpoint");

TEST_CASE("round trip preserves names, shapes, and values exactly") {
  NamedTensors tensors;
  Tensor<float> w(3, 4);
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = 0.25f * float(i) - 1.5f;
  Tensor<float> b(1, 4);
  for (int64_t i = 0; i < b.numel(); ++i) b[i] = -float(i);
  tensors.emplace_back("layer0.W", w);
  tensors.emplace_back("layer0.b", b);

  auto path = temp_file("wgad_ckpt_roundtrip.wgad");
  save_checkpoint(path.string(), tensors);
  NamedTensors back = load_checkpoint(path.string());

  REQUIRE(back.size() == 2);
  CHECK(back[0].first == "layer0.W");
  CHECK(back[1].first == "layer0.b");
  REQUIRE(back[0].second.rows() == 3);
  REQUIRE(back[0].second.cols() == 4);
  for (int64_t i = 0; i < w.numel(); ++i) CHECK(back[0].second[i] == w[i]);
  for (int64_t i = 0; i < b.numel(); ++i) CHECK(back[1].second[i] == b[i]);
  std::filesystem::remove(path);
}

TEST_CASE("serialized header carries the magic and version") {
  NamedTensors tensors;
  tensors.emplace_back("w", Tensor<float>::row({1.0f}));
  auto bytes = serialize_checkpoint(tensors);
  REQUIRE(bytes.size() > 5);
  CHECK(bytes[0] == 'W');
  CHECK(bytes[1] == 'G');
  CHECK(bytes[2] == 'A');
  CHECK(bytes[3] == 'D');
  CHECK(bytes[4] == 1);
}

TEST_CASE("serialization is byte-stable for identical stores") {
  ParamStore<double> store = init_params<double>(
      NetworkSpec::dense({2, 8, 8, 2}, Act::leaky_relu, Act::identity), 5);
  auto a = serialize_checkpoint(store_to_named(store));
  auto b = serialize_checkpoint(store_to_named(store));
  CHECK(a == b);
  CHECK(tensors_crc(store_to_named(store)) == tensors_crc(store_to_named(store)));
}

TEST_CASE("flipping one payload byte is caught by the checksum") {
  NamedTensors tensors;
  Tensor<float> w(4, 4);
  RngStream rng(3);
  rng.fill_uniform(w, -1.0, 1.0);
  tensors.emplace_back("layer0.W", w);

  auto path = temp_file("wgad_ckpt_corrupt.wgad");
  save_checkpoint(path.string(), tensors);
  auto bytes = read_all(path);
  REQUIRE(bytes.size() > 16);
  bytes[bytes.size() / 2] ^= 0x40;  // tamper inside the tensor payload
  write_all(path, bytes);
  CHECK_THROWS_AS(load_checkpoint(path.string()), ChecksumError);
  std::filesystem::remove(path);
}

TEST_CASE("truncated and wrong-magic files are rejected as data errors") {
  auto path = temp_file("wgad_ckpt_bad.wgad");

  NamedTensors tensors;
  tensors.emplace_back("w", Tensor<float>::row({1.0f, 2.0f}));
  auto bytes = serialize_checkpoint(tensors);

  SUBCASE("truncated") {
    bytes.resize(bytes.size() - 3);
    write_all(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
  }
  SUBCASE("wrong magic") {
    bytes[0] = 'X';
    write_all(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
  }
  SUBCASE("missing file") {
    std::filesystem::remove(path);
    CHECK_THROWS(load_checkpoint(path.string()));
  }
  std::filesystem::remove(path);
}

TEST_CASE("store round trip through disk reproduces a double-precision store") {
  // Values survive exactly when they are representable in the file's f32
  // payload, which freshly initialised parameters are.
  NetworkSpec spec = NetworkSpec::dense({2, 16, 16, 1}, Act::tanh_fn, Act::identity);
  ParamStore<float> store = init_params<float>(spec, 11);
  auto path = temp_file("wgad_ckpt_store.wgad");
  save_store(path.string(), store);
  ParamStore<float> back = load_store<float>(path.string());
  REQUIRE(back.tensors.size() == store.tensors.size());
  for (const auto& [name, t] : store.tensors) {
    auto it = back.tensors.find(name);
    REQUIRE(it != back.tensors.end());
    REQUIRE(it->second.same_shape(t));
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(it->second[i] == t[i]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("load_store_for validates the architecture against the file") {
  NetworkSpec spec = NetworkSpec::dense({2, 8, 8, 2}, Act::leaky_relu, Act::identity);
  ParamStore<float> store = init_params<float>(spec, 1);
  auto path = temp_file("wgad_ckpt_arch.wgad");
  save_store(path.string(), store);

  CHECK_NOTHROW(load_store_for<float>(spec, path.string()));

  NetworkSpec wider = NetworkSpec::dense({2, 16, 8, 2}, Act::leaky_relu, Act::identity);
  CHECK_THROWS_AS(load_store_for<float>(wider, path.string()), ConfigError);

  NetworkSpec with_bn =
      NetworkSpec::dense({2, 8, 8, 2}, Act::leaky_relu, Act::identity, /*hidden_bn=*/true);
  CHECK_THROWS_AS(load_store_for<float>(with_bn, path.string()), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("tensors_crc detects a single-value change") {
  NamedTensors tensors;
  tensors.emplace_back("w", Tensor<float>::row({1.0f, 2.0f, 3.0f}));
  uint32_t before = tensors_crc(tensors);
  tensors[0].second[1] = 2.0000005f;
  CHECK(tensors_crc(tensors) != before);
}

TEST_SUITE_END();
