#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cxr/checkpoint.hpp"
#include "cxr/training.hpp"

namespace cxr {

/// Positive-class scores in [0, 1] with binary ground truth.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<bool> labels;

  std::size_t positives() const;
  std::size_t negatives() const { return labels.size() - positives(); }
  /// Throws DataError on length mismatch, empty sets or scores outside [0, 1].
  void validate() const;
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

/// Descending thresholds (max + 1, each distinct score, min - 1) with the rule
/// score >= threshold. Repeated (fpr, tpr) points are dropped, so the curve
/// runs from (0, 0) to (1, 1). Throws DataError for single-class sets.
std::vector<RocPoint> roc_curve(const ScoredSet& set);

/// Trapezoidal area over FPR.
double auc(std::span<const RocPoint> curve);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion(const ScoredSet& set, double threshold);

/// 2TP / (2TP + FP + FN), zero when the denominator is zero.
double f1_positive(const Confusion& c);
/// F1 of the negative class (roles of the classes swapped).
double f1_negative(const Confusion& c);
double f1_macro(const Confusion& c);

enum class ThresholdObjective { macro_f1, positive_f1 };

std::string_view to_string(ThresholdObjective o);
ThresholdObjective parse_threshold_objective(std::string_view text);

/// Midpoints between consecutive distinct sorted scores, plus one sentinel
/// below the minimum and one above the maximum; ascending.
std::vector<double> threshold_candidates(const ScoredSet& set);

struct ThresholdChoice {
  double threshold = 0.0;
  double objective = 0.0;
};

/// The candidate maximizing the objective; ties resolve to the smallest
/// threshold. Throws DataError for single-class sets.
ThresholdChoice select_threshold(const ScoredSet& set, ThresholdObjective objective = ThresholdObjective::macro_f1);

struct EvalReport {
  double auc = 0.0;
  double threshold = 0.0;
  double f1_pos = 0.0;
  double f1_neg = 0.0;
  double f1_macro = 0.0;
  Confusion counts;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::vector<RocPoint> roc;
  /// Key/value provenance copied into the JSON "metadata" object.
  std::vector<std::pair<std::string, std::string>> metadata;
};

/// Eval-mode positive-class probabilities for every example of `data`.
ScoredSet score(const Network& network, const ImageSet& data, std::size_t batch_size = 20);

/// AUC, confusion counts and F1s at `threshold` (finite, >= 0).
EvalReport evaluate(const ScoredSet& set, double threshold);
EvalReport evaluate(const Network& network, const ImageSet& test_set, double threshold, std::size_t batch_size = 20);

/// Reference AUCs from the full-scale study, recorded as metadata only.
double reference_auc(std::string_view pathology);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve, const std::vector<std::string>& comments = {});
void write_roc_svg(std::ostream& out, std::span<const RocPoint> curve, double auc_value, const std::string& title);

}  // namespace cxr
