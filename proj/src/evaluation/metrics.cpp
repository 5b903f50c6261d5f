#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cxr/errors.hpp"
#include "cxr/evaluation.hpp"

namespace cxr {

namespace {

void require_both_classes(const ScoredSet& set, const char* what) {
  set.validate();
  if (set.positives() == 0 || set.negatives() == 0) {
    throw DataError(std::string(what) + " is undefined for a single-class set");
  }
}

std::vector<double> distinct_sorted(const std::vector<double>& scores) {
  std::vector<double> s = scores;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

std::size_t ScoredSet::positives() const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true)); }

void ScoredSet::validate() const {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  if (scores.empty()) throw DataError("scored set is empty");
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw DataError("score outside [0, 1]: " + std::to_string(s));
  }
}

std::vector<RocPoint> roc_curve(const ScoredSet& set) {
  require_both_classes(set, "ROC curve");
  const double np = static_cast<double>(set.positives()), nn = static_cast<double>(set.negatives());

  // Sort descending by score; sweep one distinct score at a time.
  std::vector<std::size_t> order(set.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });

  std::vector<RocPoint> curve;
  curve.push_back({set.scores[order.front()] + 1.0, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = set.scores[order[i]];
    while (i < order.size() && set.scores[order[i]] == s) {
      (set.labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const RocPoint p{s, static_cast<double>(fp) / nn, static_cast<double>(tp) / np};
    if (p.fpr != curve.back().fpr || p.tpr != curve.back().tpr) curve.push_back(p);
  }
  // The min - 1 sentinel classifies everything positive, which the lowest score already did.
  return curve;
}

double auc(std::span<const RocPoint> curve) {
  if (curve.size() < 2) throw DataError("an ROC curve needs at least two points");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

Confusion confusion(const ScoredSet& set, double threshold) {
  set.validate();
  Confusion c;
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    const bool predicted = set.scores[i] >= threshold;
    if (set.labels[i]) {
      (predicted ? c.tp : c.fn) += 1;
    } else {
      (predicted ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

double f1_positive(const Confusion& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double f1_negative(const Confusion& c) { return f1_positive({c.tn, c.fn, c.tp, c.fp}); }

double f1_macro(const Confusion& c) { return (f1_positive(c) + f1_negative(c)) / 2.0; }

std::string_view to_string(ThresholdObjective o) { return o == ThresholdObjective::positive_f1 ? "positive_f1" : "macro_f1"; }

ThresholdObjective parse_threshold_objective(std::string_view text) {
  if (text == "macro_f1") return ThresholdObjective::macro_f1;
  if (text == "positive_f1") return ThresholdObjective::positive_f1;
  throw ConfigError("unknown threshold objective '" + std::string(text) + "'");
}

std::vector<double> threshold_candidates(const ScoredSet& set) {
  set.validate();
  const std::vector<double> s = distinct_sorted(set.scores);
  std::vector<double> out;
  out.reserve(s.size() + 1);
  out.push_back(s.front() / 2.0);
  for (std::size_t i = 1; i < s.size(); ++i) out.push_back(s[i - 1] + (s[i] - s[i - 1]) / 2.0);
  out.push_back(s.back() < 1.0 ? (s.back() + 1.0) / 2.0 : std::nextafter(1.0, 2.0));
  return out;
}

ThresholdChoice select_threshold(const ScoredSet& set, ThresholdObjective objective) {
  require_both_classes(set, "threshold selection");
  const std::vector<double> candidates = threshold_candidates(set);

  // Ascending sweep: examples whose score is below the threshold turn negative.
  std::vector<std::size_t> order(set.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });
  Confusion c{set.positives(), set.negatives(), 0, 0};
  std::size_t next = 0;
  ThresholdChoice best{candidates.front(), -1.0};
  for (double t : candidates) {
    while (next < order.size() && set.scores[order[next]] < t) {
      if (set.labels[order[next]]) {
        --c.tp;
        ++c.fn;
      } else {
        --c.fp;
        ++c.tn;
      }
      ++next;
    }
    const double value = objective == ThresholdObjective::macro_f1 ? f1_macro(c) : f1_positive(c);
    if (value > best.objective) best = {t, value};
  }
  return best;
}

ScoredSet score(const Network& network, const ImageSet& data, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("cannot score an empty split");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  ScoredSet set;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<float> probs = predict(network, data.batch(idx));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      set.scores.push_back(std::clamp(static_cast<double>(probs[b * probs.dim(1) + kPositiveClass]), 0.0, 1.0));
      set.labels.push_back(data.targets[idx[b]] == kPositiveClass);
    }
  }
  return set;
}

EvalReport evaluate(const ScoredSet& set, double threshold) {
  if (!std::isfinite(threshold) || threshold < 0.0) throw ConfigError("threshold must be finite and non-negative");
  EvalReport r;
  r.roc = roc_curve(set);
  r.auc = auc(r.roc);
  r.threshold = threshold;
  r.counts = confusion(set, threshold);
  r.f1_pos = f1_positive(r.counts);
  r.f1_neg = f1_negative(r.counts);
  r.f1_macro = f1_macro(r.counts);
  r.n_pos = set.positives();
  r.n_neg = set.negatives();
  return r;
}

EvalReport evaluate(const Network& network, const ImageSet& test_set, double threshold, std::size_t batch_size) {
  return evaluate(score(network, test_set, batch_size), threshold);
}

double reference_auc(std::string_view pathology) {
  if (pathology == "Lung Lesion") return 0.73;
  if (pathology == "Cardiomegaly") return 0.92;
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace cxr
