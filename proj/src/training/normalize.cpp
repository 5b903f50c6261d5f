#include <cmath>

#include "cxr/errors.hpp"
#include "cxr/training.hpp"

namespace cxr {

namespace {

constexpr double kMinStd = 1e-12;

template <typename T>
Tensor<T> standardize(const Tensor<T>& image, double mean, double std) {
  Tensor<T> out(image.shape(), T(0));
  if (std < kMinStd) return out;
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<T>((static_cast<double>(image[i]) - mean) / std);
  }
  return out;
}

}  // namespace

std::string_view to_string(NormalizationMode m) { return m == NormalizationMode::dataset ? "dataset" : "per_image"; }

NormalizationMode parse_normalization_mode(std::string_view text) {
  if (text == "per_image") return NormalizationMode::per_image;
  if (text == "dataset") return NormalizationMode::dataset;
  throw ConfigError("unknown normalization mode '" + std::string(text) + "'");
}

PixelStats pixel_stats(std::span<const Tensor<float>> images) {
  double sum = 0.0, count = 0.0;
  for (const auto& img : images) {
    for (float v : img.values()) sum += v;
    count += static_cast<double>(img.size());
  }
  if (count == 0.0) throw DataError("pixel statistics need at least one image");
  const double mean = sum / count;
  double sq = 0.0;
  for (const auto& img : images) {
    for (float v : img.values()) sq += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(sq / count)};
}

template <typename T>
Tensor<T> normalize_image(const Tensor<T>& image) {
  double sum = 0.0;
  for (T v : image.values()) sum += static_cast<double>(v);
  const double mean = sum / static_cast<double>(image.size());
  double sq = 0.0;
  for (T v : image.values()) sq += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  return standardize(image, mean, std::sqrt(sq / static_cast<double>(image.size())));
}

template <typename T>
Tensor<T> normalize_image(const Tensor<T>& image, const PixelStats& stats) {
  return standardize(image, stats.mean, stats.std);
}

template Tensor<float> normalize_image(const Tensor<float>&);
template Tensor<double> normalize_image(const Tensor<double>&);
template Tensor<float> normalize_image(const Tensor<float>&, const PixelStats&);
template Tensor<double> normalize_image(const Tensor<double>&, const PixelStats&);

}  // namespace cxr
