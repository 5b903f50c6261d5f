#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cxr/csv.hpp"
#include "cxr/errors.hpp"
#include "cxr/random.hpp"
#include "cxr/training.hpp"

namespace cxr {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(adam.learning_rate > 0.0) || !std::isfinite(adam.learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

std::size_t best_epoch(std::span<const double> val_losses) {
  if (val_losses.empty()) throw DataError("empty training history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_losses.size(); ++i) {
    if (val_losses[i] < val_losses[best]) best = i;
  }
  return best + 1;
}

const Checkpoint& select_checkpoint(const TrainHistory& history, std::span<const Checkpoint> saved) {
  const std::size_t epoch = best_epoch(history.val_loss);
  if (saved.size() != history.val_loss.size()) {
    throw DataError("expected one saved checkpoint per epoch (" + std::to_string(history.val_loss.size()) + "), got " +
                    std::to_string(saved.size()));
  }
  for (const Checkpoint& c : saved) {
    if (c.info.epoch == epoch) return c;
  }
  throw DataError("no saved checkpoint for epoch " + std::to_string(epoch));
}

void write_history_csv(std::ostream& out, const TrainHistory& history, const std::vector<std::string>& comments) {
  for (const std::string& c : comments) out << "# " << c << '\n';
  out << "epoch,train_loss,val_loss,is_best\n";
  for (std::size_t i = 0; i < history.val_loss.size(); ++i) {
    csv::write_row(out, {std::to_string(i + 1), format_double(history.train_loss[i]), format_double(history.val_loss[i]),
                         i + 1 == history.best_epoch ? "1" : "0"});
  }
}

double evaluate_loss(const Network& network, const ImageSet& data, const ClassWeights& weights,
                     std::size_t batch_size) {
  if (data.size() == 0) throw DataError("cannot evaluate the loss of an empty split");
  const std::vector<double> w = weights.per_class();
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<float> probs = predict(network, data.batch(idx));
    const std::size_t c = probs.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto t = static_cast<std::size_t>(data.targets[idx[b]]);
      const double p = std::clamp(static_cast<double>(probs[b * c + t]), kProbabilityClamp, 1.0 - kProbabilityClamp);
      total -= w[t] * std::log(p);
    }
  }
  return total / static_cast<double>(data.size());
}

TrainResult train(const Network& initial, const ImageSet& train_set, const ImageSet& val_set,
                  const TrainConfig& config, const ClassWeights& weights, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() == 0) throw DataError("training split is empty");
  if (val_set.size() == 0) throw DataError("validation split is empty");

  Network net = initial;
  AdamState<float> adam;
  const std::vector<double> w = weights.per_class();
  TrainHistory history;
  Network best_net = initial;
  CheckpointInfo best_info;
  best_info.seed = config.seed;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed, {static_cast<std::uint64_t>(epoch)});
    rng.shuffle(std::span<std::size_t>(order));

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<int> targets;
      targets.reserve(idx.size());
      for (std::size_t i : idx) targets.push_back(train_set.targets[i]);

      Tape<float> tape;
      double loss_value = 0.0;
      ForwardPass<float> pass;
      Var loss;
      try {
        const Var input = tape.constant(train_set.batch(idx));
        pass = forward(tape, net, input, Mode::train);
        loss = weighted_cross_entropy(tape, pass.probabilities, std::span<const int>(targets), std::span<const double>(w));
        loss_value = static_cast<double>(tape.value(loss)[0]);
        if (!std::isfinite(loss_value)) throw NumericalError("loss is not finite");
        tape.backward(loss);
      } catch (const NumericalError& e) {
        throw NumericalError("non-finite value at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + ": " + e.what());
      }

      std::vector<std::reference_wrapper<Tensor<float>>> params;
      std::vector<Tensor<float>> grads;
      params.reserve(pass.trainable.size());
      grads.reserve(pass.trainable.size());
      for (const auto& [index, var] : pass.trainable) {
        params.emplace_back(net.parameters()[index].value);
        grads.push_back(tape.grad(var));
      }
      adam_step<float>(params, grads, adam, config.adam);
      apply_running_updates(net, pass.running_updates);
      for (const auto& p : net.parameters()) {
        if (!p.value.all_finite()) {
          throw NumericalError("non-finite parameter '" + p.name + "' after epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch_index));
        }
      }
      epoch_loss += loss_value * static_cast<double>(idx.size());
    }
    const double train_loss = epoch_loss / static_cast<double>(order.size());
    const double val_loss = evaluate_loss(net, val_set, weights, config.batch_size);
    if (!std::isfinite(val_loss)) throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));

    history.train_loss.push_back(train_loss);
    history.val_loss.push_back(val_loss);
    if (history.best_epoch == 0 || val_loss < history.val_loss[history.best_epoch - 1]) {
      history.best_epoch = epoch;
      best_net = net;
      best_info.epoch = epoch;
      best_info.val_loss = val_loss;
    }
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
  }
  return {Checkpoint{std::move(best_net), std::move(best_info)}, std::move(history)};
}

}  // namespace cxr
