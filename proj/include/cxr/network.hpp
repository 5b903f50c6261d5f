#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cxr/ops.hpp"
#include "cxr/tape.hpp"
#include "cxr/tensor.hpp"

namespace cxr {

/// Topology of a dense-connectivity classifier.
///
/// Stem (7x7/2 conv, BN, ReLU, 3x3/2 max pool), dense blocks separated by
/// compressing transitions, final BN-ReLU, global average pooling, one affine
/// head and softmax.
struct DenseNetConfig {
  std::size_t init_features = 64;
  std::size_t growth_rate = 32;
  std::vector<std::size_t> block_layers{6, 12, 24, 16};
  double compression = 0.5;
  std::size_t bottleneck_factor = 4;
  std::size_t input_channels = 3;
  std::size_t input_size = 320;
  std::size_t num_classes = 2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// Spatial downsampling from input to the final feature map: 4 from the
  /// stem, 2 per transition. Equals 32 for four blocks.
  std::size_t total_stride() const;

  friend bool operator==(const DenseNetConfig&, const DenseNetConfig&) = default;
};

/// Known presets: "densenet121-paper" and "tiny".
DenseNetConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

/// Serializes every config field as ordered key=value pairs; doubles use
/// round-trip precision so parsing reproduces the config exactly.
std::vector<std::pair<std::string, std::string>> config_to_key_values(const DenseNetConfig& config);
DenseNetConfig config_from_key_values(const std::vector<std::pair<std::string, std::string>>& pairs);

/// Channel counts through one dense block and its following transition.
struct BlockChannels {
  std::size_t input = 0;
  /// Input channels seen by each dense layer: input + l * growth_rate.
  std::vector<std::size_t> layer_inputs;
  std::size_t output = 0;
  /// floor(compression * output); zero for the last block (no transition).
  std::size_t transition_output = 0;
};

std::vector<BlockChannels> channel_plan(const DenseNetConfig& config);

enum class InitScheme { he_normal, uniform_fan_in, ones, zeros };

struct ParameterSpec {
  std::string name;
  Shape shape;
  bool trainable = true;
  InitScheme init = InitScheme::zeros;
};

/// Every parameter a config implies, in canonical order. Names follow the
/// torchvision DenseNet state-dict convention ("features.denseblock1.denselayer1.conv1.weight").
std::vector<ParameterSpec> parameter_specs(const DenseNetConfig& config);

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool trainable = true;
};

struct ParameterCounts {
  std::size_t trainable = 0;
  std::size_t non_trainable = 0;
  friend bool operator==(const ParameterCounts&, const ParameterCounts&) = default;
};

struct BatchNormSlots {
  std::size_t gamma, beta, mean, var;
};

struct DenseLayerSlots {
  BatchNormSlots norm1;
  std::size_t conv1;
  BatchNormSlots norm2;
  std::size_t conv2;
};

struct TransitionSlots {
  BatchNormSlots norm;
  std::size_t conv;
};

/// Parameter indices for each architectural element.
struct NetworkLayout {
  std::size_t conv0 = 0;
  BatchNormSlots norm0{};
  std::vector<std::vector<DenseLayerSlots>> blocks;
  std::vector<TransitionSlots> transitions;
  BatchNormSlots final_norm{};
  std::size_t classifier_weight = 0;
  std::size_t classifier_bias = 0;
};

/// Dense-connectivity network with uniquely named parameters. Immutable
/// except through explicit parameter access (optimizer steps, running-stat
/// updates).
template <typename T>
class DenseNet {
 public:
  /// Builds and randomly initializes: He-normal conv kernels, BN gamma=1/beta=0,
  /// running mean 0 / var 1, head weights uniform in +-1/sqrt(fan_in), head bias 0.
  DenseNet(DenseNetConfig config, std::uint64_t seed);

  /// Adopts given parameter values. They must match parameter_specs(config) in
  /// order, name and shape; the first offending parameter is named in the error.
  DenseNet(DenseNetConfig config, std::vector<Parameter<T>> parameters);

  const DenseNetConfig& config() const noexcept { return config_; }
  const NetworkLayout& layout() const noexcept { return layout_; }

  std::span<const Parameter<T>> parameters() const noexcept { return parameters_; }
  std::span<Parameter<T>> parameters() noexcept { return parameters_; }

  const Parameter<T>& parameter(std::string_view name) const;
  Parameter<T>& parameter(std::string_view name);
  std::size_t index_of(std::string_view name) const;

  template <typename U>
  DenseNet<U> cast() const {
    std::vector<Parameter<U>> params;
    params.reserve(parameters_.size());
    for (const Parameter<T>& p : parameters_) params.push_back({p.name, p.value.template cast<U>(), p.trainable});
    return DenseNet<U>(config_, std::move(params));
  }

 private:
  void index_parameters();

  DenseNetConfig config_;
  NetworkLayout layout_;
  std::vector<Parameter<T>> parameters_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

using Network = DenseNet<float>;

ParameterCounts count_parameters(const Network& network);
ParameterCounts count_parameters(const DenseNet<double>& network);

template <typename T>
struct RunningUpdate {
  BatchNormSlots slots;
  ChannelStats<T> stats;
};

template <typename T>
struct ForwardPass {
  /// N x num_classes probabilities; column 0 is the positive class.
  Var probabilities;
  Var logits;
  /// Final feature stack after the last BN-ReLU, before global pooling.
  Var features;
  /// Tape nodes of trainable parameters as (parameter index, node).
  std::vector<std::pair<std::size_t, Var>> trainable;
  /// New running statistics (train mode only).
  std::vector<RunningUpdate<T>> running_updates;
};

/// Records a forward pass. Does not modify the network; train-mode running
/// statistics are returned in the result.
template <typename T>
ForwardPass<T> forward(Tape<T>& tape, const DenseNet<T>& network, Var batch, Mode mode);

/// Eval-mode class probabilities for an N x C x S x S batch.
template <typename T>
Tensor<T> predict(const DenseNet<T>& network, const Tensor<T>& batch);

template <typename T>
void apply_running_updates(DenseNet<T>& network, const std::vector<RunningUpdate<T>>& updates);

extern template class DenseNet<float>;
extern template class DenseNet<double>;

}  // namespace cxr
