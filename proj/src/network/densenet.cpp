#include <cmath>

#include "cxr/network.hpp"
#include "cxr/random.hpp"

namespace cxr {

namespace {

template <typename T>
Tensor<T> initial_value(const ParameterSpec& spec, Rng& rng) {
  Tensor<T> t(spec.shape);
  switch (spec.init) {
    case InitScheme::he_normal: {
      const double fan_in = static_cast<double>(spec.shape[1] * spec.shape[2] * spec.shape[3]);
      const double stddev = std::sqrt(2.0 / fan_in);
      for (T& v : t.values()) v = static_cast<T>(rng.normal() * stddev);
      break;
    }
    case InitScheme::uniform_fan_in: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.shape[0]));
      for (T& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case InitScheme::ones:
      t.fill(T{1});
      break;
    case InitScheme::zeros:
      break;
  }
  return t;
}

template <typename T>
ParameterCounts count_impl(const DenseNet<T>& network) {
  ParameterCounts counts;
  for (const Parameter<T>& p : network.parameters()) {
    (p.trainable ? counts.trainable : counts.non_trainable) += p.value.size();
  }
  return counts;
}

}  // namespace

template <typename T>
DenseNet<T>::DenseNet(DenseNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  for (const ParameterSpec& spec : parameter_specs(config_)) {
    parameters_.push_back({spec.name, initial_value<T>(spec, rng), spec.trainable});
  }
  index_parameters();
}

template <typename T>
DenseNet<T>::DenseNet(DenseNetConfig config, std::vector<Parameter<T>> parameters)
    : config_(std::move(config)), parameters_(std::move(parameters)) {
  config_.validate();
  const std::vector<ParameterSpec> specs = parameter_specs(config_);
  const std::size_t common = std::min(specs.size(), parameters_.size());
  for (std::size_t i = 0; i < common; ++i) {
    const ParameterSpec& spec = specs[i];
    Parameter<T>& p = parameters_[i];
    if (p.name != spec.name) {
      throw ShapeError("parameter mismatch at '" + p.name + "': expected '" + spec.name + "'");
    }
    if (p.value.shape() != spec.shape) {
      throw ShapeError("parameter mismatch at '" + p.name + "': shape " + shape_string(p.value.shape()) +
                       ", expected " + shape_string(spec.shape));
    }
    p.trainable = spec.trainable;
  }
  if (parameters_.size() > specs.size()) {
    throw ShapeError("parameter mismatch at '" + parameters_[specs.size()].name + "': not part of the network");
  }
  if (parameters_.size() < specs.size()) {
    throw ShapeError("parameter mismatch at '" + specs[parameters_.size()].name + "': missing");
  }
  index_parameters();
}

template <typename T>
void DenseNet<T>::index_parameters() {
  by_name_.clear();
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    if (!by_name_.emplace(parameters_[i].name, i).second) {
      throw ShapeError("duplicate parameter name '" + parameters_[i].name + "'");
    }
  }
  auto bn = [this](const std::string& prefix) {
    return BatchNormSlots{index_of(prefix + ".weight"), index_of(prefix + ".bias"), index_of(prefix + ".running_mean"),
                          index_of(prefix + ".running_var")};
  };
  layout_ = NetworkLayout{};
  layout_.conv0 = index_of("features.conv0.weight");
  layout_.norm0 = bn("features.norm0");
  const std::size_t blocks = config_.block_layers.size();
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::string block = "features.denseblock" + std::to_string(b + 1);
    std::vector<DenseLayerSlots> layers;
    for (std::size_t l = 0; l < config_.block_layers[b]; ++l) {
      const std::string layer = block + ".denselayer" + std::to_string(l + 1);
      layers.push_back({bn(layer + ".norm1"), index_of(layer + ".conv1.weight"), bn(layer + ".norm2"),
                        index_of(layer + ".conv2.weight")});
    }
    layout_.blocks.push_back(std::move(layers));
    if (b + 1 < blocks) {
      const std::string transition = "features.transition" + std::to_string(b + 1);
      layout_.transitions.push_back({bn(transition + ".norm"), index_of(transition + ".conv.weight")});
    }
  }
  layout_.final_norm = bn("features.norm" + std::to_string(blocks + 1));
  layout_.classifier_weight = index_of("classifier.weight");
  layout_.classifier_bias = index_of("classifier.bias");
}

template <typename T>
std::size_t DenseNet<T>::index_of(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw ShapeError("no parameter named '" + std::string(name) + "'");
  return it->second;
}

template <typename T>
const Parameter<T>& DenseNet<T>::parameter(std::string_view name) const {
  return parameters_[index_of(name)];
}

template <typename T>
Parameter<T>& DenseNet<T>::parameter(std::string_view name) {
  return parameters_[index_of(name)];
}

ParameterCounts count_parameters(const Network& network) { return count_impl(network); }
ParameterCounts count_parameters(const DenseNet<double>& network) { return count_impl(network); }

template <typename T>
ForwardPass<T> forward(Tape<T>& tape, const DenseNet<T>& network, Var batch, Mode mode) {
  const DenseNetConfig& config = network.config();
  const Shape& shape = tape.value(batch).shape();
  if (shape.size() != 4 || shape[1] != config.input_channels || shape[2] != config.input_size ||
      shape[3] != config.input_size) {
    throw ShapeError("network expects batches of shape Nx" + std::to_string(config.input_channels) + "x" +
                     std::to_string(config.input_size) + "x" + std::to_string(config.input_size) + ", got " +
                     shape_string(shape));
  }

  const auto params = network.parameters();
  const NetworkLayout& layout = network.layout();
  ForwardPass<T> pass;
  std::vector<Var> vars(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    vars[i] = tape.parameter(params[i].value);
    pass.trainable.emplace_back(i, vars[i]);
  }

  const BatchNormOptions bn_opts{config.bn_eps, config.bn_momentum};
  auto norm_relu = [&](Var x, const BatchNormSlots& s) {
    const ChannelStats<T> running{params[s.mean].value, params[s.var].value};
    BatchNormVar<T> r = batch_norm(tape, x, vars[s.gamma], vars[s.beta], running, mode, bn_opts);
    if (mode == Mode::train) pass.running_updates.push_back({s, std::move(r.running)});
    return relu(tape, r.output);
  };

  Var x = conv2d(tape, batch, vars[layout.conv0], {2, 3});
  x = norm_relu(x, layout.norm0);
  x = pool(tape, x, PoolOptions{PoolKind::max, 3, 3, 2, 1});

  for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
    for (const DenseLayerSlots& layer : layout.blocks[b]) {
      Var h = norm_relu(x, layer.norm1);
      h = conv2d(tape, h, vars[layer.conv1], {1, 0});
      h = norm_relu(h, layer.norm2);
      h = conv2d(tape, h, vars[layer.conv2], {1, 1});
      x = concat_channels(tape, std::vector<Var>{x, h});
    }
    if (b < layout.transitions.size()) {
      const TransitionSlots& t = layout.transitions[b];
      x = norm_relu(x, t.norm);
      x = conv2d(tape, x, vars[t.conv], {1, 0});
      x = pool(tape, x, PoolOptions{PoolKind::avg, 2, 2, 2, 0});
    }
  }

  pass.features = norm_relu(x, layout.final_norm);
  Var pooled = global_avg_pool(tape, pass.features);
  pass.logits = linear(tape, pooled, vars[layout.classifier_weight], vars[layout.classifier_bias]);
  pass.probabilities = softmax(tape, pass.logits);
  return pass;
}

template <typename T>
Tensor<T> predict(const DenseNet<T>& network, const Tensor<T>& batch) {
  Tape<T> tape;
  const Var input = tape.constant(batch);
  const ForwardPass<T> pass = forward(tape, network, input, Mode::eval);
  return tape.value(pass.probabilities);
}

template <typename T>
void apply_running_updates(DenseNet<T>& network, const std::vector<RunningUpdate<T>>& updates) {
  auto params = network.parameters();
  for (const RunningUpdate<T>& u : updates) {
    if (params[u.slots.mean].value.shape() != u.stats.mean.shape() ||
        params[u.slots.var].value.shape() != u.stats.var.shape()) {
      throw ShapeError("running statistics update does not match " + params[u.slots.mean].name);
    }
    params[u.slots.mean].value = u.stats.mean;
    params[u.slots.var].value = u.stats.var;
  }
}

template class DenseNet<float>;
template class DenseNet<double>;

template ForwardPass<float> forward(Tape<float>&, const DenseNet<float>&, Var, Mode);
template ForwardPass<double> forward(Tape<double>&, const DenseNet<double>&, Var, Mode);
template Tensor<float> predict(const DenseNet<float>&, const Tensor<float>&);
template Tensor<double> predict(const DenseNet<double>&, const Tensor<double>&);
template void apply_running_updates(DenseNet<float>&, const std::vector<RunningUpdate<float>>&);
template void apply_running_updates(DenseNet<double>&, const std::vector<RunningUpdate<double>>&);

}  // namespace cxr
