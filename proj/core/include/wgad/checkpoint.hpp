#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wgad/network.hpp"
#include "wgad/tensor.hpp"

namespace wgad {

// Checkpoint file format:
//   magic "WGAD", version byte 1,
//   per-tensor records { name_len u16 LE, name bytes, rank u8, dims u32 LE each, data f32 LE },
//   trailing CRC32 (u32 LE) of all preceding bytes.
using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

std::vector<uint8_t> serialize_checkpoint(const NamedTensors& tensors);
NamedTensors parse_checkpoint(const std::vector<uint8_t>& bytes, const std::string& origin);

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);  // DataError / ChecksumError

// CRC32 of the serialized tensors; used to assert that a frozen network was
// not touched by a training step.
uint32_t tensors_crc(const NamedTensors& tensors);

template <class T>
NamedTensors store_to_named(const ParamStore<T>& store) {
  NamedTensors out;
  out.reserve(store.tensors.size());
  for (const auto& [name, t] : store.tensors) out.emplace_back(name, t.template cast<float>());
  return out;
}

template <class T>
void save_store(const std::string& path, const ParamStore<T>& store) {
  save_checkpoint(path, store_to_named(store));
}

template <class T>
ParamStore<T> load_store(const std::string& path) {
  ParamStore<T> store;
  for (auto& [name, t] : load_checkpoint(path)) {
    store.tensors.emplace(name, t.template cast<T>());
  }
  return store;
}

template <class T>
uint32_t store_checksum(const ParamStore<T>& store) {
  return tensors_crc(store_to_named(store));
}

// Validates that a checkpoint provides exactly the arrays an architecture
// expects (names and shapes); returns the loaded store on success.
template <class T>
ParamStore<T> load_store_for(const NetworkSpec& spec, const std::string& path) {
  ParamStore<T> loaded = load_store<T>(path);
  ParamStore<T> expected = init_params<T>(spec, /*seed=*/0);
  if (loaded.tensors.size() != expected.tensors.size()) {
    throw ConfigError("checkpoint '" + path + "' holds " + std::to_string(loaded.tensors.size()) +
                      " arrays but the configured architecture expects " +
                      std::to_string(expected.tensors.size()));
  }
  for (const auto& [name, t] : expected.tensors) {
    auto it = loaded.tensors.find(name);
    if (it == loaded.tensors.end()) {
      throw ConfigError("checkpoint '" + path + "' is missing array '" + name + "'");
    }
    if (!it->second.same_shape(t)) {
      throw ConfigError("checkpoint '" + path + "' array '" + name + "' has shape " +
                        it->second.shape_str() + " but the configured architecture expects " +
                        t.shape_str());
    }
  }
  return loaded;
}

}  // namespace wgad
