#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cxr/network.hpp"

namespace cxr {

inline constexpr std::string_view kCheckpointMagic = "CXRNET";
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::size_t epoch = 0;
  double val_loss = 0.0;
  std::uint64_t seed = 0;
  /// Additional key=value metadata (e.g. the run configuration that produced it).
  std::vector<std::pair<std::string, std::string>> extra;

  friend bool operator==(const CheckpointInfo&, const CheckpointInfo&) = default;
};

struct Checkpoint {
  Network network;
  CheckpointInfo info;
};

// Binary layout, all integers little-endian:
//   "CXRNET" | u16 version
//   u32 line count, then per line: u32 byte length + UTF-8 "key=value"
//     (network config keys, then epoch, val_loss, seed, then extra lines)
//   u32 parameter count, then per parameter:
//     u16 name length, name bytes, u8 rank, rank x u32 extents, values as f32

std::string serialize_checkpoint(const Network& network, const CheckpointInfo& info);

/// Parses a complete checkpoint image. Throws FormatError on truncation, bad
/// magic or version; nothing is returned unless the whole image is valid.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Network& network, const CheckpointInfo& info, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads and additionally requires the stored network to match `expected`.
/// Parameter mismatches name the first offending parameter.
Checkpoint load_checkpoint(const std::filesystem::path& path, const DenseNetConfig& expected);

}  // namespace cxr
