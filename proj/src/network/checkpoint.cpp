#include "cxr/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

namespace cxr {

namespace {

const std::set<std::string> kReservedKeys{"epoch", "val_loss", "seed"};

template <typename U>
void put(std::string& out, U value) {
  static_assert(std::is_integral_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu));
  }
}

void put_f32(std::string& out, float value) { put(out, std::bit_cast<std::uint32_t>(value)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string serialize_checkpoint(const Network& network, const CheckpointInfo& info) {
  std::vector<std::pair<std::string, std::string>> lines = config_to_key_values(network.config());
  lines.emplace_back("epoch", std::to_string(info.epoch));
  lines.emplace_back("val_loss", format_double(info.val_loss));
  lines.emplace_back("seed", std::to_string(info.seed));
  for (const auto& [key, value] : info.extra) {
    if (kReservedKeys.count(key) || key.find('=') != std::string::npos) {
      throw ConfigError("invalid checkpoint metadata key '" + key + "'");
    }
    lines.emplace_back(key, value);
  }

  std::string out(kCheckpointMagic);
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(lines.size()));
  for (const auto& [key, value] : lines) {
    const std::string line = key + "=" + value;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(line.size()));
    out += line;
  }

  const auto params = network.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter<float>& p : params) {
    if (p.name.size() > std::numeric_limits<std::uint16_t>::max()) throw ConfigError("parameter name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out += p.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.value.rank()));
    for (std::size_t e : p.value.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    for (float v : p.value.values()) put_f32(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kCheckpointMagic.size(), "magic") != kCheckpointMagic) throw FormatError("not a CXRNET checkpoint");
  const auto version = r.get<std::uint16_t>("format version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }

  std::vector<std::pair<std::string, std::string>> config_lines;
  CheckpointInfo info;
  bool have_epoch = false, have_loss = false, have_seed = false;
  const auto line_count = r.get<std::uint32_t>("metadata line count");
  const std::set<std::string> config_keys = [] {
    std::set<std::string> keys;
    for (const auto& kv : config_to_key_values(DenseNetConfig{})) keys.insert(kv.first);
    return keys;
  }();
  for (std::uint32_t i = 0; i < line_count; ++i) {
    const auto len = r.get<std::uint32_t>("metadata line length");
    const std::string line(r.take(len, "metadata line"));
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed checkpoint metadata line '" + line + "'");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    try {
      if (key == "epoch") {
        info.epoch = std::stoull(value);
        have_epoch = true;
      } else if (key == "val_loss") {
        info.val_loss = std::stod(value);
        have_loss = true;
      } else if (key == "seed") {
        info.seed = std::stoull(value);
        have_seed = true;
      } else if (config_keys.count(key)) {
        config_lines.emplace_back(std::move(key), std::move(value));
      } else {
        info.extra.emplace_back(std::move(key), std::move(value));
      }
    } catch (const std::logic_error&) {
      throw FormatError("unparseable checkpoint metadata value for " + key);
    }
  }
  if (!have_epoch || !have_loss || !have_seed) throw FormatError("checkpoint metadata lacks epoch/val_loss/seed");

  DenseNetConfig config;
  try {
    config = config_from_key_values(config_lines);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid network config in checkpoint: ") + e.what());
  }

  std::vector<Parameter<float>> params;
  const auto count = r.get<std::uint32_t>("parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter<float> p;
    const auto name_len = r.get<std::uint16_t>("parameter name length");
    p.name = std::string(r.take(name_len, "parameter name"));
    const auto rank = r.get<std::uint8_t>("parameter rank");
    Shape shape(rank);
    std::size_t elements = 1;
    for (auto& e : shape) {
      e = r.get<std::uint32_t>("parameter extent");
      if (e != 0 && elements > r.remaining() / e) throw FormatError("checkpoint truncated while reading parameter values");
      elements *= e;
    }
    if (elements > r.remaining() / sizeof(float)) throw FormatError("checkpoint truncated while reading parameter values");
    std::vector<float> values(elements);
    for (float& v : values) v = std::bit_cast<float>(r.get<std::uint32_t>("parameter values"));
    try {
      p.value = Tensor<float>(std::move(shape), std::move(values));
    } catch (const ShapeError& e) {
      throw FormatError("invalid shape for parameter '" + p.name + "': " + e.what());
    }
    params.push_back(std::move(p));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint parameter table");
  return Checkpoint{Network(std::move(config), std::move(params)), std::move(info)};
}

void save_checkpoint(const Network& network, const CheckpointInfo& info, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(network, info);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const DenseNetConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  std::vector<Parameter<float>> params(ckpt.network.parameters().begin(), ckpt.network.parameters().end());
  // Shape/name mismatches surface here, naming the first offending parameter.
  Network checked(expected, std::move(params));
  const auto stored = config_to_key_values(ckpt.network.config());
  const auto wanted = config_to_key_values(expected);
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (stored[i] != wanted[i]) {
      throw ShapeError("checkpoint config mismatch on " + stored[i].first + ": stored " + stored[i].second +
                       ", expected " + wanted[i].second);
    }
  }
  return Checkpoint{std::move(checked), std::move(ckpt.info)};
}

}  // namespace cxr
