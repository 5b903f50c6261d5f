#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "cxr/network.hpp"

namespace cxr {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config key " + key + ": expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw ConfigError("config key " + key + ": expected a real number, got '" + text + "'");
  }
  return v;
}

std::size_t transition_width(double compression, std::size_t channels) {
  return static_cast<std::size_t>(std::floor(compression * static_cast<double>(channels)));
}

void add_batch_norm(std::vector<ParameterSpec>& specs, const std::string& prefix, std::size_t channels) {
  specs.push_back({prefix + ".weight", {channels}, true, InitScheme::ones});
  specs.push_back({prefix + ".bias", {channels}, true, InitScheme::zeros});
  specs.push_back({prefix + ".running_mean", {channels}, false, InitScheme::zeros});
  specs.push_back({prefix + ".running_var", {channels}, false, InitScheme::ones});
}

}  // namespace

void DenseNetConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(init_features, "init_features");
  positive(growth_rate, "growth_rate");
  positive(bottleneck_factor, "bottleneck_factor");
  positive(input_channels, "input_channels");
  positive(input_size, "input_size");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (block_layers.empty()) throw ConfigError("block_layers must list at least one block");
  for (std::size_t layers : block_layers) positive(layers, "every block layer count");
  if (!(compression > 0.0 && compression <= 1.0)) throw ConfigError("compression must lie in (0, 1]");
  if (!(bn_eps > 0.0)) throw ConfigError("bn_eps must be positive");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw ConfigError("bn_momentum must lie in [0, 1)");
  if (block_layers.size() > 20) throw ConfigError("too many dense blocks");
  const std::size_t stride = total_stride();
  if (input_size % stride != 0) {
    throw ConfigError("input_size " + std::to_string(input_size) + " must be a multiple of the network stride " +
                      std::to_string(stride));
  }
  std::size_t channels = init_features;
  for (std::size_t b = 0; b < block_layers.size(); ++b) {
    channels += block_layers[b] * growth_rate;
    if (b + 1 < block_layers.size()) {
      channels = transition_width(compression, channels);
      if (channels == 0) throw ConfigError("compression leaves a transition with zero channels");
    }
  }
}

std::size_t DenseNetConfig::total_stride() const {
  const std::size_t transitions = block_layers.empty() ? 0 : block_layers.size() - 1;
  return std::size_t{4} << transitions;
}

DenseNetConfig preset_config(std::string_view name) {
  if (name == "densenet121-paper") return DenseNetConfig{};
  if (name == "tiny") {
    DenseNetConfig c;
    c.init_features = 8;
    c.growth_rate = 4;
    c.block_layers = {2, 2};
    c.compression = 0.5;
    c.bottleneck_factor = 4;
    c.input_channels = 1;
    c.input_size = 32;
    c.num_classes = 2;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: densenet121-paper, tiny)");
}

std::vector<std::string> preset_names() { return {"densenet121-paper", "tiny"}; }

std::vector<std::pair<std::string, std::string>> config_to_key_values(const DenseNetConfig& c) {
  std::string blocks;
  for (std::size_t i = 0; i < c.block_layers.size(); ++i) {
    if (i) blocks += ',';
    blocks += std::to_string(c.block_layers[i]);
  }
  return {
      {"init_features", std::to_string(c.init_features)},
      {"growth_rate", std::to_string(c.growth_rate)},
      {"block_layers", blocks},
      {"compression", format_double(c.compression)},
      {"bottleneck_factor", std::to_string(c.bottleneck_factor)},
      {"input_channels", std::to_string(c.input_channels)},
      {"input_size", std::to_string(c.input_size)},
      {"num_classes", std::to_string(c.num_classes)},
      {"bn_eps", format_double(c.bn_eps)},
      {"bn_momentum", format_double(c.bn_momentum)},
  };
}

DenseNetConfig config_from_key_values(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::map<std::string, std::string> kv(pairs.begin(), pairs.end());
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("network config is missing key " + key);
    return it->second;
  };
  DenseNetConfig c;
  c.init_features = parse_count("init_features", get("init_features"));
  c.growth_rate = parse_count("growth_rate", get("growth_rate"));
  c.block_layers.clear();
  const std::string& blocks = get("block_layers");
  std::size_t start = 0;
  while (start <= blocks.size()) {
    const std::size_t comma = blocks.find(',', start);
    const std::size_t end = comma == std::string::npos ? blocks.size() : comma;
    c.block_layers.push_back(parse_count("block_layers", blocks.substr(start, end - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  c.compression = parse_real("compression", get("compression"));
  c.bottleneck_factor = parse_count("bottleneck_factor", get("bottleneck_factor"));
  c.input_channels = parse_count("input_channels", get("input_channels"));
  c.input_size = parse_count("input_size", get("input_size"));
  c.num_classes = parse_count("num_classes", get("num_classes"));
  c.bn_eps = parse_real("bn_eps", get("bn_eps"));
  c.bn_momentum = parse_real("bn_momentum", get("bn_momentum"));
  c.validate();
  return c;
}

std::vector<BlockChannels> channel_plan(const DenseNetConfig& config) {
  config.validate();
  std::vector<BlockChannels> plan;
  std::size_t channels = config.init_features;
  for (std::size_t b = 0; b < config.block_layers.size(); ++b) {
    BlockChannels block;
    block.input = channels;
    for (std::size_t l = 0; l < config.block_layers[b]; ++l) {
      block.layer_inputs.push_back(channels + l * config.growth_rate);
    }
    block.output = channels + config.block_layers[b] * config.growth_rate;
    channels = block.output;
    if (b + 1 < config.block_layers.size()) {
      block.transition_output = transition_width(config.compression, channels);
      channels = block.transition_output;
    }
    plan.push_back(std::move(block));
  }
  return plan;
}

std::vector<ParameterSpec> parameter_specs(const DenseNetConfig& config) {
  const std::vector<BlockChannels> plan = channel_plan(config);
  const std::size_t k = config.growth_rate;
  const std::size_t bottleneck = config.bottleneck_factor * k;

  std::vector<ParameterSpec> specs;
  specs.push_back({"features.conv0.weight", {config.init_features, config.input_channels, 7, 7}, true,
                   InitScheme::he_normal});
  add_batch_norm(specs, "features.norm0", config.init_features);
  for (std::size_t b = 0; b < plan.size(); ++b) {
    const std::string block = "features.denseblock" + std::to_string(b + 1);
    for (std::size_t l = 0; l < plan[b].layer_inputs.size(); ++l) {
      const std::string layer = block + ".denselayer" + std::to_string(l + 1);
      const std::size_t in = plan[b].layer_inputs[l];
      add_batch_norm(specs, layer + ".norm1", in);
      specs.push_back({layer + ".conv1.weight", {bottleneck, in, 1, 1}, true, InitScheme::he_normal});
      add_batch_norm(specs, layer + ".norm2", bottleneck);
      specs.push_back({layer + ".conv2.weight", {k, bottleneck, 3, 3}, true, InitScheme::he_normal});
    }
    if (b + 1 < plan.size()) {
      const std::string transition = "features.transition" + std::to_string(b + 1);
      add_batch_norm(specs, transition + ".norm", plan[b].output);
      specs.push_back({transition + ".conv.weight", {plan[b].transition_output, plan[b].output, 1, 1}, true,
                       InitScheme::he_normal});
    }
  }
  const std::size_t features = plan.back().output;
  add_batch_norm(specs, "features.norm" + std::to_string(plan.size() + 1), features);
  specs.push_back({"classifier.weight", {features, config.num_classes}, true, InitScheme::uniform_fan_in});
  specs.push_back({"classifier.bias", {config.num_classes}, true, InitScheme::zeros});
  return specs;
}

}  // namespace cxr
