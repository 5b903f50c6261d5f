#include "cxr/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cxr {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
Tensor<T> checked(Tensor<T> t, const char* op) {
  if (!t.all_finite()) throw NumericalError(std::string("non-finite output from ") + op);
  return t;
}

void require_rank(const Shape& shape, std::size_t rank, const char* what) {
  if (shape.size() != rank) {
    throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                     shape_string(shape));
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w;
  std::size_t oc, kh, kw;
  std::size_t oh, ow;
  std::size_t stride, pad;

  std::size_t patch() const { return c * kh * kw; }
  std::size_t area() const { return oh * ow; }
  std::size_t image_size() const { return c * h * w; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, Conv2dOptions opts) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  if (opts.stride == 0) throw ShapeError("conv2d stride must be positive");
  if (kernel[1] != input[1]) {
    throw ShapeError("conv2d channel mismatch: input has " + std::to_string(input[1]) +
                     " channels, kernel expects " + std::to_string(kernel[1]));
  }
  ConvGeometry g{input[0], input[1], input[2], input[3], kernel[0], kernel[2], kernel[3],
                 0,        0,        opts.stride, opts.padding};
  g.oh = output_extent(g.h, g.kh, g.stride, g.pad);
  g.ow = output_extent(g.w, g.kw, g.stride, g.pad);
  return g;
}

// Unfolds one C×H×W image into a (C·kh·kw) × (oh·ow) patch matrix.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.area();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          T* out = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(out, out + g.ow, T{0});
            continue;
          }
          const T* src = image + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T{0}
                                                                         : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch-matrix gradients back onto the image.
template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* image) {
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.area();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = image + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const T* in = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dst[static_cast<std::size_t>(ix)] += in[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d_impl(const Tensor<T>& input, const Tensor<T>& kernel, const ConvGeometry& g) {
  Tensor<T> out({g.n, g.oc, g.oh, g.ow});
  ConstMatMap<T> k(kernel.data(), static_cast<Eigen::Index>(g.oc), static_cast<Eigen::Index>(g.patch()));
  std::vector<T> col(g.pointwise() ? 0 : g.patch() * g.area());
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* image = input.data() + n * g.image_size();
    MatMap<T> o(out.data() + n * g.oc * g.area(), static_cast<Eigen::Index>(g.oc),
                static_cast<Eigen::Index>(g.area()));
    if (g.pointwise()) {
      o.noalias() = k * ConstMatMap<T>(image, static_cast<Eigen::Index>(g.c),
                                       static_cast<Eigen::Index>(g.area()));
    } else {
      im2col(image, g, col.data());
      o.noalias() = k * ConstMatMap<T>(col.data(), static_cast<Eigen::Index>(g.patch()),
                                       static_cast<Eigen::Index>(g.area()));
    }
  }
  return out;
}

template <typename T>
void check_channel_param(const Tensor<T>& t, std::size_t channels, const char* what) {
  if (t.rank() != 1 || t.dim(0) != channels) {
    throw ShapeError(std::string("batch_norm ") + what + " must have length " + std::to_string(channels) +
                     ", got " + shape_string(t.shape()));
  }
}

struct PoolGeometry {
  std::size_t n, c, h, w, oh, ow;
};

PoolGeometry pool_geometry(const Shape& input, const PoolOptions& opts) {
  require_rank(input, 4, "pool input");
  if (opts.stride == 0 || opts.window_h == 0 || opts.window_w == 0) {
    throw ShapeError("pool window and stride must be positive");
  }
  if (2 * opts.padding > opts.window_h || 2 * opts.padding > opts.window_w) {
    throw ShapeError("pool padding must be at most half the window");
  }
  return {input[0],
          input[1],
          input[2],
          input[3],
          output_extent(input[2], opts.window_h, opts.stride, opts.padding),
          output_extent(input[3], opts.window_w, opts.stride, opts.padding)};
}

// Shared by the pure and recorded max pool; `argmax` receives the flat input
// index each output was taken from.
template <typename T>
Tensor<T> max_pool_impl(const Tensor<T>& input, const PoolOptions& opts, std::vector<std::size_t>* argmax) {
  const PoolGeometry g = pool_geometry(input.shape(), opts);
  Tensor<T> out({g.n, g.c, g.oh, g.ow});
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < g.n * g.c; ++plane) {
    const std::size_t base = plane * g.h * g.w;
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox, ++o) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = base;
        for (std::size_t ki = 0; ki < opts.window_h; ++ki) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * opts.stride + ki) -
                                    static_cast<std::ptrdiff_t>(opts.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t kj = 0; kj < opts.window_w; ++kj) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * opts.stride + kj) -
                                      static_cast<std::ptrdiff_t>(opts.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            const std::size_t idx = base + static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix);
            if (input[idx] > best) {
              best = input[idx];
              best_idx = idx;
            }
          }
        }
        out[o] = best;
        if (argmax) (*argmax)[o] = best_idx;
      }
    }
  }
  return out;
}

// Average pooling divides by the full window area, padded cells included.
template <typename T>
Tensor<T> avg_pool_impl(const Tensor<T>& input, const PoolOptions& opts) {
  const PoolGeometry g = pool_geometry(input.shape(), opts);
  Tensor<T> out({g.n, g.c, g.oh, g.ow});
  const T inv_area = T{1} / static_cast<T>(opts.window_h * opts.window_w);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < g.n * g.c; ++plane) {
    const T* src = input.data() + plane * g.h * g.w;
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox, ++o) {
        T sum{0};
        for (std::size_t ki = 0; ki < opts.window_h; ++ki) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * opts.stride + ki) -
                                    static_cast<std::ptrdiff_t>(opts.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t kj = 0; kj < opts.window_w; ++kj) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * opts.stride + kj) -
                                      static_cast<std::ptrdiff_t>(opts.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            sum += src[static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)];
          }
        }
        out[o] = sum * inv_area;
      }
    }
  }
  return out;
}

}  // namespace

std::size_t output_extent(std::size_t in, std::size_t window, std::size_t stride, std::size_t padding) {
  if (stride == 0) throw ShapeError("stride must be positive");
  const std::size_t padded = in + 2 * padding;
  if (window == 0 || padded < window) {
    throw ShapeError("non-positive output extent: input " + std::to_string(in) + ", window " +
                     std::to_string(window) + ", padding " + std::to_string(padding));
  }
  return (padded - window) / stride + 1;
}

// ---------------------------------------------------------------------------
// Pure kernels

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, Conv2dOptions opts) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.shape(), opts);
  return checked(conv2d_impl(input, kernel, g), "conv2d");
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, Conv2dOptions opts) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.shape(), opts);
  if (bias.rank() != 1 || bias.dim(0) != g.oc) {
    throw ShapeError("conv2d bias must have length " + std::to_string(g.oc));
  }
  Tensor<T> out = conv2d_impl(input, kernel, g);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oc = 0; oc < g.oc; ++oc) {
      T* plane = out.data() + (n * g.oc + oc) * g.area();
      for (std::size_t i = 0; i < g.area(); ++i) plane[i] += bias[oc];
    }
  }
  return checked(std::move(out), "conv2d");
}

template <typename T>
BatchNormResult<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                              const ChannelStats<T>& running, Mode mode, BatchNormOptions opts) {
  require_rank(input.shape(), 4, "batch_norm input");
  if (!(opts.eps > 0.0)) throw ConfigError("batch_norm eps must be positive");
  const std::size_t n = input.dim(0), c = input.dim(1), area = input.dim(2) * input.dim(3);
  check_channel_param(gamma, c, "gamma");
  check_channel_param(beta, c, "beta");
  check_channel_param(running.mean, c, "running mean");
  check_channel_param(running.var, c, "running variance");

  BatchNormResult<T> result;
  if (mode == Mode::train) {
    result.used.mean = Tensor<T>({c});
    result.used.var = Tensor<T>({c});
    const double count = static_cast<double>(n * area);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = input.data() + (b * c + ch) * area;
        for (std::size_t i = 0; i < area; ++i) sum += static_cast<double>(p[i]);
      }
      const double mean = sum / count;
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = input.data() + (b * c + ch) * area;
        for (std::size_t i = 0; i < area; ++i) {
          const double d = static_cast<double>(p[i]) - mean;
          sq += d * d;
        }
      }
      result.used.mean[ch] = static_cast<T>(mean);
      result.used.var[ch] = static_cast<T>(sq / count);
    }
    result.running.mean = Tensor<T>({c});
    result.running.var = Tensor<T>({c});
    const T keep = static_cast<T>(opts.momentum);
    const T take = static_cast<T>(1.0 - opts.momentum);
    for (std::size_t ch = 0; ch < c; ++ch) {
      result.running.mean[ch] = keep * running.mean[ch] + take * result.used.mean[ch];
      result.running.var[ch] = keep * running.var[ch] + take * result.used.var[ch];
    }
  } else {
    result.used = running;
    result.running = running;
  }

  result.output = Tensor<T>(input.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(result.used.var[ch]) + opts.eps));
    const T scale = gamma[ch] * inv_std;
    const T shift = beta[ch] - result.used.mean[ch] * scale;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * area;
      for (std::size_t i = 0; i < area; ++i) result.output[off + i] = input[off + i] * scale + shift;
    }
  }
  result.output = checked(std::move(result.output), "batch_norm");
  return result;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return checked(std::move(out), "relu");
}

template <typename T>
Tensor<T> pool(const Tensor<T>& input, PoolOptions opts) {
  if (opts.kind == PoolKind::max) return checked(max_pool_impl(input, opts, nullptr), "max_pool");
  return checked(avg_pool_impl(input, opts), "avg_pool");
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  require_rank(input.shape(), 4, "global_avg_pool input");
  const std::size_t n = input.dim(0), c = input.dim(1), area = input.dim(2) * input.dim(3);
  Tensor<T> out({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    double sum = 0.0;
    const T* p = input.data() + i * area;
    for (std::size_t j = 0; j < area; ++j) sum += static_cast<double>(p[j]);
    out[i] = static_cast<T>(sum / static_cast<double>(area));
  }
  return checked(std::move(out), "global_avg_pool");
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> inputs) {
  if (inputs.empty()) throw ShapeError("concat_channels needs at least one input");
  std::size_t channels = 0;
  for (const Tensor<T>& t : inputs) {
    require_rank(t.shape(), 4, "concat_channels input");
    const Shape& ref = inputs.front().shape();
    if (t.dim(0) != ref[0] || t.dim(2) != ref[2] || t.dim(3) != ref[3]) {
      throw ShapeError("concat_channels batch/spatial mismatch: " + shape_string(t.shape()) + " vs " +
                       shape_string(ref));
    }
    channels += t.dim(1);
  }
  const std::size_t n = inputs.front().dim(0);
  const std::size_t area = inputs.front().dim(2) * inputs.front().dim(3);
  Tensor<T> out({n, channels, inputs.front().dim(2), inputs.front().dim(3)});
  for (std::size_t b = 0; b < n; ++b) {
    T* dst = out.data() + b * channels * area;
    for (const Tensor<T>& t : inputs) {
      const std::size_t block = t.dim(1) * area;
      const T* src = t.data() + b * block;
      std::copy(src, src + block, dst);
      dst += block;
    }
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count) {
  require_rank(input.shape(), 4, "slice_channels input");
  if (count == 0 || begin + count > input.dim(1)) {
    throw ShapeError("channel slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_string(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1), area = input.dim(2) * input.dim(3);
  Tensor<T> out({n, count, input.dim(2), input.dim(3)});
  for (std::size_t b = 0; b < n; ++b) {
    const T* src = input.data() + (b * c + begin) * area;
    std::copy(src, src + count * area, out.data() + b * count * area);
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input.shape(), 2, "linear input");
  require_rank(weight.shape(), 2, "linear weight");
  const std::size_t n = input.dim(0), f = input.dim(1), k = weight.dim(1);
  if (weight.dim(0) != f) {
    throw ShapeError("linear feature mismatch: input has " + std::to_string(f) + " features, weight expects " +
                     std::to_string(weight.dim(0)));
  }
  if (bias.rank() != 1 || bias.dim(0) != k) throw ShapeError("linear bias must have length " + std::to_string(k));
  Tensor<T> out({n, k});
  MatMap<T> o(out.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  o.noalias() = ConstMatMap<T>(input.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f)) *
                ConstMatMap<T>(weight.data(), static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] += bias[j];
  }
  return checked(std::move(out), "linear");
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax input");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (c < 2) throw ShapeError("softmax needs at least two classes");
  Tensor<T> out(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = logits.data() + r * c;
    const T top = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(static_cast<double>(row[j] - top));
    for (std::size_t j = 0; j < c; ++j) {
      out[r * c + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - top)) / total);
    }
  }
  return checked(std::move(out), "softmax");
}

// ---------------------------------------------------------------------------
// Recorded operations

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var kernel, Conv2dOptions opts) {
  const ConvGeometry g = conv_geometry(tape.value(input).shape(), tape.value(kernel).shape(), opts);
  Tensor<T> out = conv2d(tape.value(input), tape.value(kernel), opts);
  return tape.record("conv2d", std::move(out), {input, kernel}, [=](Tape<T>& t, const Tensor<T>& dout) {
    const Tensor<T>& x = t.value(input);
    const Tensor<T>& w = t.value(kernel);
    const auto oc = static_cast<Eigen::Index>(g.oc);
    const auto patch = static_cast<Eigen::Index>(g.patch());
    const auto area = static_cast<Eigen::Index>(g.area());
    std::vector<T> col(g.pointwise() ? 0 : g.patch() * g.area());
    std::vector<T> dcol(g.pointwise() ? 0 : g.patch() * g.area());
    T* dw = t.requires_grad(kernel) ? t.grad_buffer(kernel).data() : nullptr;
    T* dx = t.requires_grad(input) ? t.grad_buffer(input).data() : nullptr;
    for (std::size_t n = 0; n < g.n; ++n) {
      const T* image = x.data() + n * g.image_size();
      ConstMatMap<T> dy(dout.data() + n * g.oc * g.area(), oc, area);
      if (dw) {
        MatMap<T> dk(dw, oc, patch);
        if (g.pointwise()) {
          dk.noalias() += dy * ConstMatMap<T>(image, patch, area).transpose();
        } else {
          im2col(image, g, col.data());
          dk.noalias() += dy * ConstMatMap<T>(col.data(), patch, area).transpose();
        }
      }
      if (dx) {
        ConstMatMap<T> k(w.data(), oc, patch);
        if (g.pointwise()) {
          MatMap<T>(dx + n * g.image_size(), patch, area).noalias() += k.transpose() * dy;
        } else {
          MatMap<T>(dcol.data(), patch, area).noalias() = k.transpose() * dy;
          col2im_add(dcol.data(), g, dx + n * g.image_size());
        }
      }
    }
  });
}

template <typename T>
BatchNormVar<T> batch_norm(Tape<T>& tape, Var input, Var gamma, Var beta, const ChannelStats<T>& running,
                           Mode mode, BatchNormOptions opts) {
  BatchNormResult<T> r = batch_norm(tape.value(input), tape.value(gamma), tape.value(beta), running, mode, opts);
  ChannelStats<T> used = r.used;
  Var out = tape.record(
      "batch_norm", std::move(r.output), {input, gamma, beta},
      [input, gamma, beta, used, mode, opts](Tape<T>& t, const Tensor<T>& dout) {
        const Tensor<T>& x = t.value(input);
        const Tensor<T>& g = t.value(gamma);
        const std::size_t n = x.dim(0), c = x.dim(1), area = x.dim(2) * x.dim(3);
        const double count = static_cast<double>(n * area);
        T* dx = t.requires_grad(input) ? t.grad_buffer(input).data() : nullptr;
        T* dg = t.requires_grad(gamma) ? t.grad_buffer(gamma).data() : nullptr;
        T* db = t.requires_grad(beta) ? t.grad_buffer(beta).data() : nullptr;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double mean = static_cast<double>(used.mean[ch]);
          const double inv_std = 1.0 / std::sqrt(static_cast<double>(used.var[ch]) + opts.eps);
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * area;
            for (std::size_t i = 0; i < area; ++i) {
              const double xhat = (static_cast<double>(x[off + i]) - mean) * inv_std;
              sum_dy += static_cast<double>(dout[off + i]);
              sum_dy_xhat += static_cast<double>(dout[off + i]) * xhat;
            }
          }
          if (dg) dg[ch] += static_cast<T>(sum_dy_xhat);
          if (db) db[ch] += static_cast<T>(sum_dy);
          if (!dx) continue;
          const double scale = static_cast<double>(g[ch]) * inv_std;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * area;
            for (std::size_t i = 0; i < area; ++i) {
              const double dy = static_cast<double>(dout[off + i]);
              if (mode == Mode::train) {
                const double xhat = (static_cast<double>(x[off + i]) - mean) * inv_std;
                dx[off + i] += static_cast<T>(scale * (dy - sum_dy / count - xhat * sum_dy_xhat / count));
              } else {
                dx[off + i] += static_cast<T>(scale * dy);
              }
            }
          }
        }
      });
  return {out, std::move(r.running)};
}

template <typename T>
Var relu(Tape<T>& tape, Var input) {
  return tape.record("relu", relu(tape.value(input)), {input}, [input](Tape<T>& t, const Tensor<T>& dout) {
    const Tensor<T>& x = t.value(input);
    Tensor<T>& dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > T{0}) dx[i] += dout[i];
    }
  });
}

template <typename T>
Var pool(Tape<T>& tape, Var input, PoolOptions opts) {
  if (opts.kind == PoolKind::max) {
    std::vector<std::size_t> argmax;
    Tensor<T> out = checked(max_pool_impl(tape.value(input), opts, &argmax), "max_pool");
    return tape.record("max_pool", std::move(out), {input},
                       [input, argmax = std::move(argmax)](Tape<T>& t, const Tensor<T>& dout) {
                         Tensor<T>& dx = t.grad_buffer(input);
                         for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += dout[o];
                       });
  }
  const Shape in_shape = tape.value(input).shape();
  const PoolGeometry g = pool_geometry(in_shape, opts);
  return tape.record(
      "avg_pool", pool(tape.value(input), opts), {input}, [input, opts, g](Tape<T>& t, const Tensor<T>& dout) {
        Tensor<T>& dx = t.grad_buffer(input);
        const T inv_area = T{1} / static_cast<T>(opts.window_h * opts.window_w);
        std::size_t o = 0;
        for (std::size_t plane = 0; plane < g.n * g.c; ++plane) {
          T* dst = dx.data() + plane * g.h * g.w;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            for (std::size_t ox = 0; ox < g.ow; ++ox, ++o) {
              const T share = dout[o] * inv_area;
              for (std::size_t ki = 0; ki < opts.window_h; ++ki) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * opts.stride + ki) -
                                          static_cast<std::ptrdiff_t>(opts.padding);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                for (std::size_t kj = 0; kj < opts.window_w; ++kj) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * opts.stride + kj) -
                                            static_cast<std::ptrdiff_t>(opts.padding);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                  dst[static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)] += share;
                }
              }
            }
          }
        }
      });
}

template <typename T>
Var global_avg_pool(Tape<T>& tape, Var input) {
  return tape.record("global_avg_pool", global_avg_pool(tape.value(input)), {input},
                     [input](Tape<T>& t, const Tensor<T>& dout) {
                       Tensor<T>& dx = t.grad_buffer(input);
                       const std::size_t area = dx.dim(2) * dx.dim(3);
                       const T inv_area = T{1} / static_cast<T>(area);
                       for (std::size_t i = 0; i < dout.size(); ++i) {
                         const T share = dout[i] * inv_area;
                         T* p = dx.data() + i * area;
                         for (std::size_t j = 0; j < area; ++j) p[j] += share;
                       }
                     });
}

template <typename T>
Var concat_channels(Tape<T>& tape, const std::vector<Var>& inputs) {
  std::vector<Tensor<T>> values;
  values.reserve(inputs.size());
  for (Var v : inputs) values.push_back(tape.value(v));
  Tensor<T> out = concat_channels(std::span<const Tensor<T>>(values));
  return tape.record("concat_channels", std::move(out), inputs, [inputs](Tape<T>& t, const Tensor<T>& dout) {
    const std::size_t n = dout.dim(0), total = dout.dim(1), area = dout.dim(2) * dout.dim(3);
    std::size_t begin = 0;
    for (Var v : inputs) {
      const std::size_t ch = t.value(v).dim(1);
      if (t.requires_grad(v)) {
        Tensor<T>& dx = t.grad_buffer(v);
        for (std::size_t b = 0; b < n; ++b) {
          const T* src = dout.data() + (b * total + begin) * area;
          T* dst = dx.data() + b * ch * area;
          for (std::size_t i = 0; i < ch * area; ++i) dst[i] += src[i];
        }
      }
      begin += ch;
    }
  });
}

template <typename T>
Var linear(Tape<T>& tape, Var input, Var weight, Var bias) {
  Tensor<T> out = linear(tape.value(input), tape.value(weight), tape.value(bias));
  return tape.record("linear", std::move(out), {input, weight, bias},
                     [input, weight, bias](Tape<T>& t, const Tensor<T>& dout) {
                       const Tensor<T>& x = t.value(input);
                       const Tensor<T>& w = t.value(weight);
                       const auto n = static_cast<Eigen::Index>(x.dim(0));
                       const auto f = static_cast<Eigen::Index>(x.dim(1));
                       const auto k = static_cast<Eigen::Index>(w.dim(1));
                       ConstMatMap<T> dy(dout.data(), n, k);
                       if (t.requires_grad(input)) {
                         MatMap<T>(t.grad_buffer(input).data(), n, f).noalias() +=
                             dy * ConstMatMap<T>(w.data(), f, k).transpose();
                       }
                       if (t.requires_grad(weight)) {
                         MatMap<T>(t.grad_buffer(weight).data(), f, k).noalias() +=
                             ConstMatMap<T>(x.data(), n, f).transpose() * dy;
                       }
                       if (t.requires_grad(bias)) {
                         Tensor<T>& db = t.grad_buffer(bias);
                         for (Eigen::Index r = 0; r < n; ++r) {
                           for (Eigen::Index j = 0; j < k; ++j) db[static_cast<std::size_t>(j)] += dy(r, j);
                         }
                       }
                     });
}

template <typename T>
Var softmax(Tape<T>& tape, Var logits) {
  Tensor<T> probs = softmax(tape.value(logits));
  const Tensor<T> saved = probs;
  return tape.record("softmax", std::move(probs), {logits}, [logits, saved](Tape<T>& t, const Tensor<T>& dout) {
    Tensor<T>& dx = t.grad_buffer(logits);
    const std::size_t n = saved.dim(0), c = saved.dim(1);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        dot += static_cast<double>(dout[r * c + j]) * static_cast<double>(saved[r * c + j]);
      }
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t i = r * c + j;
        dx[i] += static_cast<T>(static_cast<double>(saved[i]) * (static_cast<double>(dout[i]) - dot));
      }
    }
  });
}

#define CXR_INSTANTIATE_OPS(T)                                                                             \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, Conv2dOptions);                            \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dOptions);          \
  template BatchNormResult<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                                         const ChannelStats<T>&, Mode, BatchNormOptions);                  \
  template Tensor<T> relu(const Tensor<T>&);                                                               \
  template Tensor<T> pool(const Tensor<T>&, PoolOptions);                                                  \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                    \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                                          \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);                           \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> softmax(const Tensor<T>&);                                                            \
  template Var conv2d(Tape<T>&, Var, Var, Conv2dOptions);                                                  \
  template BatchNormVar<T> batch_norm(Tape<T>&, Var, Var, Var, const ChannelStats<T>&, Mode,               \
                                      BatchNormOptions);                                                   \
  template Var relu(Tape<T>&, Var);                                                                        \
  template Var pool(Tape<T>&, Var, PoolOptions);                                                           \
  template Var global_avg_pool(Tape<T>&, Var);                                                             \
  template Var concat_channels(Tape<T>&, const std::vector<Var>&);                                         \
  template Var linear(Tape<T>&, Var, Var, Var);                                                            \
  template Var softmax(Tape<T>&, Var);

CXR_INSTANTIATE_OPS(float)
CXR_INSTANTIATE_OPS(double)

#undef CXR_INSTANTIATE_OPS

}  // namespace cxr
