#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cxr/tape.hpp"
#include "cxr/tensor.hpp"

namespace cxr {

enum class Mode { train, eval };

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

enum class PoolKind { max, avg };

struct PoolOptions {
  PoolKind kind = PoolKind::max;
  std::size_t window_h = 2;
  std::size_t window_w = 2;
  std::size_t stride = 2;
  std::size_t padding = 0;
};

struct BatchNormOptions {
  double eps = 1e-5;
  /// Weight kept on the old running statistic: new = momentum*old + (1-momentum)*batch.
  double momentum = 0.9;
};

/// Per-channel statistics, each of length C.
template <typename T>
struct ChannelStats {
  Tensor<T> mean;
  Tensor<T> var;
};

template <typename T>
struct BatchNormResult {
  Tensor<T> output;
  /// Statistics the output was normalized with (batch stats in train mode).
  ChannelStats<T> used;
  /// Running statistics after this call; equal to the inputs in eval mode.
  ChannelStats<T> running;
};

/// floor((in + 2*padding - window) / stride) + 1, or ShapeError when that is < 1.
std::size_t output_extent(std::size_t in, std::size_t window, std::size_t stride, std::size_t padding);

// Pure kernels. Each validates its preconditions and throws NumericalError if
// its output is not finite.

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, Conv2dOptions opts);
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 Conv2dOptions opts);

template <typename T>
BatchNormResult<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                              const ChannelStats<T>& running, Mode mode, BatchNormOptions opts);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> pool(const Tensor<T>& input, PoolOptions opts);

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> inputs);

/// Channels [begin, begin+count) of an NCHW tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count);

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

// Recorded versions. Gradients flow to every input that requires them.

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var kernel, Conv2dOptions opts);

template <typename T>
struct BatchNormVar {
  Var output;
  ChannelStats<T> running;
};

/// Batch norm on the tape. Running statistics are inputs and outputs, never
/// tape nodes, so they receive no gradient.
template <typename T>
BatchNormVar<T> batch_norm(Tape<T>& tape, Var input, Var gamma, Var beta,
                           const ChannelStats<T>& running, Mode mode, BatchNormOptions opts);

template <typename T>
Var relu(Tape<T>& tape, Var input);

template <typename T>
Var pool(Tape<T>& tape, Var input, PoolOptions opts);

template <typename T>
Var global_avg_pool(Tape<T>& tape, Var input);

template <typename T>
Var concat_channels(Tape<T>& tape, const std::vector<Var>& inputs);

template <typename T>
Var linear(Tape<T>& tape, Var input, Var weight, Var bias);

template <typename T>
Var softmax(Tape<T>& tape, Var logits);

}  // namespace cxr
