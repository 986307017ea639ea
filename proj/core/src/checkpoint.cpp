#include "wgad/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "wgad/error.hpp"

namespace wgad {

namespace {

constexpr char kMagic[4] = {'W', 'G', 'A', 'D'};
constexpr uint8_t kVersion = 1;

void put_u16(std::vector<uint8_t>& buf, uint16_t v) {
  buf.push_back(static_cast<uint8_t>(v & 0xff));
  buf.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const std::vector<uint8_t>& buf, size_t& off) {
  uint16_t v = static_cast<uint16_t>(buf[off] | (buf[off + 1] << 8));
  off += 2;
  return v;
}

uint32_t get_u32(const std::vector<uint8_t>& buf, size_t& off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[off + i]) << (8 * i);
  off += 4;
  return v;
}

uint32_t crc_of(const uint8_t* data, size_t n) {
  return static_cast<uint32_t>(crc32(0ul, data, static_cast<uInt>(n)));
}

}  // namespace

std::vector<uint8_t> serialize_checkpoint(const NamedTensors& tensors) {
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  buf.push_back(kVersion);
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xffff) throw DataError("tensor name too long for checkpoint: " + name);
    if (t.rank() < 1 || t.rank() > 255) throw DataError("unsupported tensor rank in checkpoint");
    put_u16(buf, static_cast<uint16_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    buf.push_back(static_cast<uint8_t>(t.rank()));
    for (int64_t d : t.shape()) put_u32(buf, static_cast<uint32_t>(d));
    for (int64_t i = 0; i < t.numel(); ++i) {
      uint32_t bits;
      float v = t[i];
      std::memcpy(&bits, &v, 4);
      put_u32(buf, bits);
    }
  }
  put_u32(buf, crc_of(buf.data(), buf.size()));
  return buf;
}

NamedTensors parse_checkpoint(const std::vector<uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 9) throw DataError("checkpoint '" + origin + "' is truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("checkpoint '" + origin + "' has bad magic bytes");
  }
  if (bytes[4] != kVersion) {
    throw DataError("checkpoint '" + origin + "' has unsupported format version " +
                    std::to_string(bytes[4]));
  }
  const size_t payload = bytes.size() - 4;
  size_t off = bytes.size() - 4;
  const uint32_t stored = get_u32(bytes, off);
  const uint32_t actual = crc_of(bytes.data(), payload);
  if (stored != actual) {
    throw ChecksumError("checkpoint '" + origin + "' failed its CRC32 check");
  }
  NamedTensors out;
  off = 5;
  while (off < payload) {
    if (payload - off < 2) throw DataError("checkpoint '" + origin + "' is truncated");
    const uint16_t name_len = get_u16(bytes, off);
    if (payload - off < name_len + 1u) throw DataError("checkpoint '" + origin + "' is truncated");
    std::string name(bytes.begin() + static_cast<long>(off),
                     bytes.begin() + static_cast<long>(off + name_len));
    off += name_len;
    const uint8_t rank = bytes[off++];
    if (rank < 1 || payload - off < 4u * rank) {
      throw DataError("checkpoint '" + origin + "' is truncated");
    }
    std::vector<int64_t> dims;
    dims.reserve(rank);
    int64_t numel = 1;
    for (int r = 0; r < rank; ++r) {
      const uint32_t d = get_u32(bytes, off);
      if (d == 0) throw DataError("checkpoint '" + origin + "' has a zero dimension");
      dims.push_back(static_cast<int64_t>(d));
      numel *= d;
    }
    if (payload - off < 4u * static_cast<size_t>(numel)) {
      throw DataError("checkpoint '" + origin + "' is truncated");
    }
    Tensor<float> t(dims);
    for (int64_t i = 0; i < numel; ++i) {
      const uint32_t bits = get_u32(bytes, off);
      float v;
      std::memcpy(&v, &bits, 4);
      t[i] = v;
    }
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  const std::vector<uint8_t> buf = serialize_checkpoint(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw DataError("failed writing checkpoint: " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, path);
}

uint32_t tensors_crc(const NamedTensors& tensors) {
  const std::vector<uint8_t> buf = serialize_checkpoint(tensors);
  return crc_of(buf.data(), buf.size());
}

}  // namespace wgad
