#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cxr/cli.hpp"
#include "cxr/errors.hpp"
#include "json.hpp"

namespace cxr {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_unsigned() || v.is_number_integer()) return v.dump();
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
    return buf;
  }
  throw ConfigError("network config values must be numbers or strings");
}

}  // namespace

DenseNetConfig RunConfig::network() const {
  auto pairs = config_to_key_values(preset_config(preset));
  for (const auto& [key, value] : network_overrides) {
    bool found = false;
    for (auto& [k, v] : pairs) {
      if (k == key) {
        v = value;
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown network config key '" + key + "'");
  }
  DenseNetConfig c = config_from_key_values(pairs);
  c.validate();
  return c;
}

namespace {

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  reject_unknown(j,
                 {"pathology", "preset", "seed", "manifest", "cohort", "checkpoint", "init_checkpoint", "out", "uncertain", "split_unit",
                  "view_filter", "threshold", "threshold_objective", "network", "train", "synthetic"},
                 "");

  RunConfig c;
  read(j, "pathology", c.pathology, "");
  read(j, "preset", c.preset, "");
  read(j, "seed", c.seed, "");
  if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
  if (j.contains("cohort")) c.cohort = j["cohort"].get<std::string>();
  if (j.contains("checkpoint")) c.checkpoint = j["checkpoint"].get<std::string>();
  if (j.contains("init_checkpoint")) c.init_checkpoint = j["init_checkpoint"].get<std::string>();
  if (j.contains("out")) c.out = j["out"].get<std::string>();
  if (j.contains("uncertain")) c.uncertain = parse_uncertain_policy(j["uncertain"].get<std::string>());
  if (j.contains("split_unit")) c.split_unit = parse_split_unit(j["split_unit"].get<std::string>());
  if (j.contains("view_filter")) c.view_filter = parse_view_filter(j["view_filter"].get<std::string>());
  if (j.contains("threshold") && !j["threshold"].is_null()) {
    double t = 0.0;
    read(j, "threshold", t, "");
    c.threshold = t;
  }
  if (j.contains("threshold_objective")) {
    c.objective = parse_threshold_objective(j["threshold_objective"].get<std::string>());
  }

  if (j.contains("network")) {
    const json& n = j["network"];
    if (!n.is_object()) throw ConfigError("'network' must be an object");
    for (const auto& [key, value] : n.items()) {
      if (key == "block_layers" && value.is_array()) {
        std::string joined;
        for (const auto& e : value) joined += (joined.empty() ? "" : ",") + scalar_text(e);
        c.network_overrides.emplace_back(key, joined);
      } else {
        c.network_overrides.emplace_back(key, scalar_text(value));
      }
    }
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    const std::string w = "train.";
    reject_unknown(t,
                   {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "normalization",
                    "class_weighting"},
                   w);
    read(t, "epochs", c.train.epochs, w);
    read(t, "batch_size", c.train.batch_size, w);
    read(t, "learning_rate", c.train.adam.learning_rate, w);
    read(t, "beta1", c.train.adam.beta1, w);
    read(t, "beta2", c.train.adam.beta2, w);
    read(t, "epsilon", c.train.adam.epsilon, w);
    if (t.contains("normalization")) c.train.normalization = parse_normalization_mode(t["normalization"].get<std::string>());
    if (t.contains("class_weighting")) {
      c.train.weighting = parse_class_weighting(t["class_weighting"].get<std::string>());
    }
  }
  if (j.contains("synthetic")) {
    const json& s = j["synthetic"];
    const std::string w = "synthetic.";
    reject_unknown(s,
                   {"side", "train_count", "val_count", "test_count", "positive_fraction", "radius_min", "radius_max",
                    "contrast_min", "contrast_max", "noise_std"},
                   w);
    read(s, "side", c.synthetic.side, w);
    read(s, "train_count", c.synthetic.train_count, w);
    read(s, "val_count", c.synthetic.val_count, w);
    read(s, "test_count", c.synthetic.test_count, w);
    read(s, "positive_fraction", c.synthetic.positive_fraction, w);
    read(s, "radius_min", c.synthetic.radius_min, w);
    read(s, "radius_max", c.synthetic.radius_max, w);
    read(s, "contrast_min", c.synthetic.contrast_min, w);
    read(s, "contrast_max", c.synthetic.contrast_max, w);
    read(s, "noise_std", c.synthetic.noise_std, w);
  }
  return c;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string run_config_json(const RunConfig& c) {
  json j;
  j["pathology"] = c.pathology;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["uncertain"] = std::string(to_string(c.uncertain));
  j["split_unit"] = std::string(to_string(c.split_unit));
  j["view_filter"] = std::string(to_string(c.view_filter));
  j["threshold"] = c.threshold ? json(*c.threshold) : json(nullptr);
  j["threshold_objective"] = std::string(to_string(c.objective));
  json n = json::object();
  for (const auto& [k, v] : c.network_overrides) n[k] = v;
  j["network"] = n;
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.adam.learning_rate},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"epsilon", c.train.adam.epsilon},
                {"normalization", std::string(to_string(c.train.normalization))},
                {"class_weighting", std::string(to_string(c.train.weighting))}};
  const SyntheticSpec& s = c.synthetic;
  j["synthetic"] = {{"side", s.side},
                    {"train_count", s.train_count},
                    {"val_count", s.val_count},
                    {"test_count", s.test_count},
                    {"positive_fraction", s.positive_fraction},
                    {"radius_min", s.radius_min},
                    {"radius_max", s.radius_max},
                    {"contrast_min", s.contrast_min},
                    {"contrast_max", s.contrast_max},
                    {"noise_std", s.noise_std}};
  return j.dump();
}

std::vector<std::pair<std::string, std::string>> run_config_entries(const RunConfig& c) {
  return {{"run_config", run_config_json(c)}};
}

}  // namespace cxr
