#include <algorithm>

#include "cxr/errors.hpp"
#include "cxr/training.hpp"

namespace cxr {

std::size_t ImageSet::positives() const {
  return static_cast<std::size_t>(std::count(targets.begin(), targets.end(), kPositiveClass));
}

Tensor<float> ImageSet::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ShapeError("empty batch");
  const std::size_t per = images.size() / images.dim(0);
  Shape shape = images.shape();
  shape[0] = indices.size();
  Tensor<float> out(shape);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) throw ShapeError("batch index out of range");
    std::copy_n(images.data() + indices[b] * per, per, out.data() + b * per);
  }
  return out;
}

std::vector<Tensor<float>> load_images(const std::vector<CohortRecord>& records, const std::filesystem::path& root,
                                       std::size_t side) {
  std::vector<Tensor<float>> out;
  out.reserve(records.size());
  for (const CohortRecord& r : records) {
    const std::filesystem::path p(r.path);
    out.push_back(load_image(p.is_absolute() ? p : root / p, side));
  }
  return out;
}

ImageSet make_image_set(std::span<const Tensor<float>> raw, const std::vector<CohortRecord>& records,
                        std::size_t channels, NormalizationMode mode, const PixelStats& stats) {
  if (raw.empty()) throw DataError("cannot build an empty image set");
  if (raw.size() != records.size()) throw ShapeError("image and record counts differ");
  if (channels == 0) throw ConfigError("input channels must be positive");
  const Shape& first = raw.front().shape();
  if (first.size() != 3 || first[0] != 1) throw ShapeError("expected 1xHxW images, got " + shape_string(first));
  const std::size_t plane = first[1] * first[2];

  ImageSet set;
  set.images = Tensor<float>({raw.size(), channels, first[1], first[2]});
  set.targets.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].shape() != first) throw ShapeError("image " + records[i].path + " has shape " + shape_string(raw[i].shape()));
    const Tensor<float> norm = mode == NormalizationMode::per_image ? normalize_image(raw[i]) : normalize_image(raw[i], stats);
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(norm.data(), plane, set.images.data() + (i * channels + c) * plane);
    }
    set.targets.push_back(records[i].positive ? kPositiveClass : kNegativeClass);
  }
  return set;
}

}  // namespace cxr
