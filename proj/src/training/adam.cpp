#include <cmath>

#include "cxr/errors.hpp"
#include "cxr/training.hpp"

namespace cxr {

template <typename T>
void adam_step(std::span<const std::reference_wrapper<Tensor<T>>> params, std::span<const Tensor<T>> grads,
               AdamState<T>& state, const AdamConfig& config) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  if (state.m.empty() && state.v.empty()) {
    for (const Tensor<T>& p : params) {
      state.m.emplace_back(p.shape(), T(0));
      state.v.emplace_back(p.shape(), T(0));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& s = params[i].get().shape();
    if (grads[i].shape() != s || state.m[i].shape() != s || state.v[i].shape() != s) {
      throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
  }

  ++state.step;
  const double b1 = config.beta1, b2 = config.beta2;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i].get();
    const Tensor<T>& g = grads[i];
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
      const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = config.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + config.epsilon);
      p[k] = static_cast<T>(static_cast<double>(p[k]) - update);
    }
  }
}

template void adam_step<float>(std::span<const std::reference_wrapper<Tensor<float>>>, std::span<const Tensor<float>>,
                               AdamState<float>&, const AdamConfig&);
template void adam_step<double>(std::span<const std::reference_wrapper<Tensor<double>>>,
                                std::span<const Tensor<double>>, AdamState<double>&, const AdamConfig&);

}  // namespace cxr
