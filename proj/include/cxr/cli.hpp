#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cxr/data.hpp"
#include "cxr/evaluation.hpp"
#include "cxr/network.hpp"
#include "cxr/training.hpp"

namespace cxr {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Everything a run needs. Loaded from JSON; command-line flags override keys.
///
/// JSON schema (all keys optional):
///   pathology, preset, seed, manifest, cohort, checkpoint, init_checkpoint, out,
///   uncertain, split_unit, view_filter, threshold, threshold_objective,
///   network   { any DenseNetConfig key; block_layers as an array }
///   train     { epochs, batch_size, learning_rate, beta1, beta2, epsilon,
///               normalization, class_weighting }
///   synthetic { side, train_count, val_count, test_count, positive_fraction,
///               radius_min, radius_max, contrast_min, contrast_max, noise_std }
struct RunConfig {
  std::string pathology = "Lung Lesion";
  std::string preset = "tiny";
  /// Explicit network keys applied on top of the preset.
  std::vector<std::pair<std::string, std::string>> network_overrides;
  std::uint64_t seed = 0;

  std::filesystem::path manifest;
  std::filesystem::path cohort;
  std::filesystem::path checkpoint;
  /// Starting weights for training; random initialization when empty.
  std::filesystem::path init_checkpoint;
  std::filesystem::path out = "out";

  UncertainPolicy uncertain = UncertainPolicy::exclude;
  SplitUnit split_unit = SplitUnit::per_image;
  ViewFilter view_filter = ViewFilter::frontal_only;

  TrainConfig train;
  std::optional<double> threshold;
  ThresholdObjective objective = ThresholdObjective::macro_f1;
  SyntheticSpec synthetic;

  DenseNetConfig network() const;
};

/// Throws ConfigError on malformed JSON, unknown keys or bad values.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// JSON form of the configuration. Filesystem paths are left out so that the
/// text depends only on what determines the numbers.
std::string run_config_json(const RunConfig& config);

/// Flattened "key=value" lines of the same content, for CSV/checkpoint headers.
std::vector<std::pair<std::string, std::string>> run_config_entries(const RunConfig& config);

/// Command-line entry point. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cxr
