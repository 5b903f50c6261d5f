#include <algorithm>
#include <cmath>

#include "cxr/errors.hpp"
#include "cxr/training.hpp"

namespace cxr {

namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

}  // namespace

template <typename T>
T weighted_cross_entropy(std::span<const T> probs, std::span<const T> one_hot, std::span<const T> weights) {
  if (probs.size() != one_hot.size() || probs.size() != weights.size() || probs.empty()) {
    throw ShapeError("weighted_cross_entropy: probs, one-hot and weights must have the same nonzero length");
  }
  std::size_t hot = 0, ones = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (one_hot[i] == T(1)) {
      hot = i;
      ++ones;
    } else if (one_hot[i] != T(0)) {
      throw ShapeError("weighted_cross_entropy: malformed one-hot label");
    }
    sum += static_cast<double>(probs[i]);
  }
  if (ones != 1) throw ShapeError("weighted_cross_entropy: one-hot label must contain exactly one 1");
  if (std::abs(sum - 1.0) > 1e-5) throw ShapeError("weighted_cross_entropy: probabilities do not sum to 1");
  return static_cast<T>(-static_cast<double>(weights[hot]) * std::log(clamp_probability(static_cast<double>(probs[hot]))));
}

template <typename T>
Var weighted_cross_entropy(Tape<T>& tape, Var probs, std::span<const int> targets, std::span<const double> weights) {
  const Tensor<T>& p = tape.value(probs);
  if (p.rank() != 2 || p.dim(0) != targets.size()) {
    throw ShapeError("weighted_cross_entropy: expected N x C probabilities for " + std::to_string(targets.size()) +
                     " targets, got " + shape_string(p.shape()));
  }
  const std::size_t n = p.dim(0), c = p.dim(1);
  if (weights.size() != c) throw ShapeError("weighted_cross_entropy: one weight per class required");
  std::vector<int> t(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t[i] < 0 || static_cast<std::size_t>(t[i]) >= c) throw ShapeError("weighted_cross_entropy: target out of range");
    total -= w[static_cast<std::size_t>(t[i])] * std::log(clamp_probability(static_cast<double>(p[i * c + static_cast<std::size_t>(t[i])])));
  }
  Tensor<T> out({1}, static_cast<T>(total / static_cast<double>(n)));
  return tape.record("weighted_cross_entropy", std::move(out), {probs},
                     [probs, t = std::move(t), w = std::move(w), n, c](Tape<T>& tp, const Tensor<T>& g) {
                       const Tensor<T>& pv = tp.value(probs);
                       Tensor<T>& gp = tp.grad_buffer(probs);
                       const double scale = static_cast<double>(g[0]) / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         const std::size_t k = i * c + static_cast<std::size_t>(t[i]);
                         const double pk = static_cast<double>(pv[k]);
                         if (pk < kProbabilityClamp || pk > 1.0 - kProbabilityClamp) continue;
                         gp[k] += static_cast<T>(-scale * w[static_cast<std::size_t>(t[i])] / pk);
                       }
                     });
}

template float weighted_cross_entropy<float>(std::span<const float>, std::span<const float>, std::span<const float>);
template double weighted_cross_entropy<double>(std::span<const double>, std::span<const double>, std::span<const double>);
template Var weighted_cross_entropy<float>(Tape<float>&, Var, std::span<const int>, std::span<const double>);
template Var weighted_cross_entropy<double>(Tape<double>&, Var, std::span<const int>, std::span<const double>);

}  // namespace cxr
