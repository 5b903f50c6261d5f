#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cxr/checkpoint.hpp"
#include "cxr/data.hpp"
#include "cxr/network.hpp"
#include "cxr/tape.hpp"

namespace cxr {

/// Output column of each class. Column 0 is the positive finding.
inline constexpr int kPositiveClass = 0;
inline constexpr int kNegativeClass = 1;

/// Probabilities are clamped to [kProbabilityClamp, 1 - kProbabilityClamp] before the log.
inline constexpr double kProbabilityClamp = 1e-7;

// ---------------------------------------------------------------------------
// Class weights and loss

/// Imbalance weights w_p = (N_p + N_n) / N_p and w_n = (N_p + N_n) / N_n.
struct ClassWeights {
  double positive = 1.0;
  double negative = 1.0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;

  /// Indexed by class column: {positive, negative}.
  std::vector<double> per_class() const { return {positive, negative}; }
};

/// Throws DataError when either count is zero.
ClassWeights class_weights(std::size_t n_positive, std::size_t n_negative);

/// Both weights 1, keeping the counts for reference.
ClassWeights unit_class_weights(std::size_t n_positive, std::size_t n_negative);

/// -sum_i w_i q_i log(clamp(p_i)) for one example. `one_hot` must contain
/// exactly one 1 and zeros elsewhere; probabilities must sum to 1 within 1e-5.
template <typename T>
T weighted_cross_entropy(std::span<const T> probs, std::span<const T> one_hot, std::span<const T> weights);

/// Batch-mean weighted cross-entropy over N x C probabilities with integer
/// class targets. The gradient is zero where the probability is clamped.
template <typename T>
Var weighted_cross_entropy(Tape<T>& tape, Var probs, std::span<const int> targets, std::span<const double> weights);

// ---------------------------------------------------------------------------
// Normalization

enum class NormalizationMode { per_image, dataset };

std::string_view to_string(NormalizationMode m);
NormalizationMode parse_normalization_mode(std::string_view text);

struct PixelStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Population mean/std over all pixels of all images.
PixelStats pixel_stats(std::span<const Tensor<float>> images);

/// Subtracts the image's own mean and divides by its population std; images
/// with std < 1e-12 map to all zeros.
template <typename T>
Tensor<T> normalize_image(const Tensor<T>& image);

/// Same with externally supplied statistics (dataset mode).
template <typename T>
Tensor<T> normalize_image(const Tensor<T>& image, const PixelStats& stats);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update in place. A fresh (empty) state is sized on
/// the first call.
template <typename T>
void adam_step(std::span<const std::reference_wrapper<Tensor<T>>> params, std::span<const Tensor<T>> grads,
               AdamState<T>& state, const AdamConfig& config);

// ---------------------------------------------------------------------------
// Datasets

/// In-memory, already normalized examples.
struct ImageSet {
  Tensor<float> images;  // N x C x S x S
  std::vector<int> targets;

  std::size_t size() const { return targets.size(); }
  std::size_t positives() const;
  Tensor<float> batch(std::span<const std::size_t> indices) const;
};

/// Loads cohort records as raw 1 x S x S images in record order.
std::vector<Tensor<float>> load_images(const std::vector<CohortRecord>& records, const std::filesystem::path& root,
                                       std::size_t side);

/// Normalizes (per image, or with `stats` in dataset mode), then replicates
/// the grayscale plane across `channels`.
ImageSet make_image_set(std::span<const Tensor<float>> raw, const std::vector<CohortRecord>& records,
                        std::size_t channels, NormalizationMode mode, const PixelStats& stats = {});

// ---------------------------------------------------------------------------
// Training loop

enum class ClassWeighting { inverse_frequency, unit };

std::string_view to_string(ClassWeighting w);
ClassWeighting parse_class_weighting(std::string_view text);

struct TrainConfig {
  std::size_t epochs = 15;
  std::size_t batch_size = 20;
  AdamConfig adam;
  std::uint64_t seed = 0;
  NormalizationMode normalization = NormalizationMode::per_image;
  ClassWeighting weighting = ClassWeighting::inverse_frequency;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  /// 1-based epoch with the least validation loss (earliest on ties).
  std::size_t best_epoch = 0;
};

/// 1-based argmin, earliest index on ties. Throws on an empty sequence.
std::size_t best_epoch(std::span<const double> val_losses);

/// The saved checkpoint whose epoch is the history's argmin epoch.
const Checkpoint& select_checkpoint(const TrainHistory& history, std::span<const Checkpoint> saved);

/// CSV "epoch,train_loss,val_loss,is_best", preceded by '#' comment lines.
void write_history_csv(std::ostream& out, const TrainHistory& history, const std::vector<std::string>& comments = {});

struct TrainResult {
  Checkpoint best;
  TrainHistory history;
};

using EpochCallback = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

/// Mean weighted loss of `network` over `data` in eval mode.
double evaluate_loss(const Network& network, const ImageSet& data, const ClassWeights& weights,
                     std::size_t batch_size);

/// Shuffles the training set each epoch with a generator keyed by (seed, epoch),
/// runs Adam over mini-batches (the final short batch included), measures the
/// validation loss in eval mode and keeps the least-validation-loss epoch.
TrainResult train(const Network& initial, const ImageSet& train_set, const ImageSet& val_set,
                  const TrainConfig& config, const ClassWeights& weights, const EpochCallback& on_epoch = {});

}  // namespace cxr
