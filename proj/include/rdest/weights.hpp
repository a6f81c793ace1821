#pragma once

// Weights file ("RDNW"), all integers little-endian:
//
//   magic "RDNW" | u16 version | u8 kind (0 = G, 1 = F-bits, 2 = F-dist)
//   u32 K | K x u32 QP | u64 training seed | u32 best epoch | u32 record count
//   per record: u32 name length | name bytes | u8 rank | rank x u32 dims
//               | prod(dims) x f32 values

#include <bit>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rdest/binary_io.hpp"
#include "rdest/errors.hpp"

namespace rdest {

enum class NetworkKind : std::uint8_t { G = 0, FBits = 1, FDist = 2 };

inline std::string to_string(NetworkKind k) {
  switch (k) {
    case NetworkKind::G: return "g";
    case NetworkKind::FBits: return "f-bits";
    case NetworkKind::FDist: return "f-dist";
  }
  return "unknown";
}

struct WeightBlob {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  friend bool operator==(const WeightBlob& a, const WeightBlob& b) {
    if (a.name != b.name || a.dims != b.dims || a.values.size() != b.values.size()) return false;
    for (std::size_t i = 0; i < a.values.size(); ++i)
      if (std::bit_cast<std::uint32_t>(a.values[i]) != std::bit_cast<std::uint32_t>(b.values[i])) return false;
    return true;
  }
};

struct ModelWeights {
  static constexpr std::uint16_t kFormatVersion = 1;

  std::uint16_t version = kFormatVersion;
  NetworkKind kind = NetworkKind::G;
  std::vector<int> qps;
  std::uint64_t seed = 0;
  std::uint32_t best_epoch = 0;
  std::vector<WeightBlob> blobs;

  // Bitwise comparison of every value.
  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;

  const WeightBlob* find(const std::string& name) const {
    for (const auto& b : blobs)
      if (b.name == name) return &b;
    return nullptr;
  }
};

inline std::vector<std::uint8_t> encode_weights(const ModelWeights& w) {
  ByteWriter out;
  out.magic("RDNW");
  out.u16(w.version);
  out.u8(static_cast<std::uint8_t>(w.kind));
  out.u32(static_cast<std::uint32_t>(w.qps.size()));
  for (int qp : w.qps) out.u32(static_cast<std::uint32_t>(qp));
  out.u64(w.seed);
  out.u32(w.best_epoch);
  out.u32(static_cast<std::uint32_t>(w.blobs.size()));
  for (const auto& b : w.blobs) {
    out.u32(static_cast<std::uint32_t>(b.name.size()));
    out.bytes(std::span(reinterpret_cast<const std::uint8_t*>(b.name.data()), b.name.size()));
    out.u8(static_cast<std::uint8_t>(b.dims.size()));
    for (auto d : b.dims) out.u32(d);
    out.f32s(b.values);
  }
  return out.release();
}

// expected_kind, when given, turns a kind mismatch into LoadErrorKind::KindMismatch.
inline ModelWeights decode_weights(std::span<const std::uint8_t> bytes,
                                   std::optional<NetworkKind> expected_kind = std::nullopt) {
  ByteReader in(bytes);
  ModelWeights w;
  try {
    if (!in.magic("RDNW")) throw LoadError(LoadErrorKind::BadMagic, "not a weights file (bad magic)");
    w.version = in.u16();
    if (w.version != ModelWeights::kFormatVersion)
      throw LoadError(LoadErrorKind::VersionMismatch, "unsupported weights version " + std::to_string(w.version) +
                                                          " (expected " +
                                                          std::to_string(ModelWeights::kFormatVersion) + ")");
    const auto kind = in.u8();
    if (kind > 2) throw LoadError(LoadErrorKind::Malformed, "unknown network kind " + std::to_string(kind));
    w.kind = static_cast<NetworkKind>(kind);
    if (expected_kind && *expected_kind != w.kind)
      throw LoadError(LoadErrorKind::KindMismatch,
                      "weights are for network " + to_string(w.kind) + ", expected " + to_string(*expected_kind));
    const auto k = in.u32();
    if (k > 52) throw LoadError(LoadErrorKind::Malformed, "implausible QP count " + std::to_string(k));
    for (std::uint32_t i = 0; i < k; ++i) w.qps.push_back(static_cast<int>(in.u32()));
    w.seed = in.u64();
    w.best_epoch = in.u32();
    const auto count = in.u32();
    for (std::uint32_t r = 0; r < count; ++r) {
      WeightBlob b;
      const auto len = in.u32();
      auto name = in.bytes(len);
      b.name.assign(name.begin(), name.end());
      const auto rank = in.u8();
      std::uint64_t n = 1;
      for (int d = 0; d < rank; ++d) {
        b.dims.push_back(in.u32());
        n *= b.dims.back();
      }
      if (n * 4 > in.remaining())
        throw LoadError(LoadErrorKind::Truncated, "weights file truncated inside record " + b.name);
      b.values.resize(static_cast<std::size_t>(n));
      in.f32s(b.values);
      w.blobs.push_back(std::move(b));
    }
    if (!in.at_end()) throw LoadError(LoadErrorKind::Malformed, "trailing bytes after last weight record");
  } catch (const TruncatedError& e) {
    throw LoadError(LoadErrorKind::Truncated, std::string("weights file truncated: ") + e.what());
  }
  return w;
}

inline void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
  atomic_write_file(path, encode_weights(w));
}

inline ModelWeights load_weights(const std::filesystem::path& path,
                                 std::optional<NetworkKind> expected_kind = std::nullopt) {
  return decode_weights(read_file(path), expected_kind);
}

}  // namespace rdest
