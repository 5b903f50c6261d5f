#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "cxr/data.hpp"
#include "cxr/errors.hpp"

namespace cxr {

namespace {

struct Tap {
  std::size_t lo, hi;
  float w_hi;
};

// Source taps for each destination index under the half-pixel convention.
std::vector<Tap> bilinear_taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    double x = (static_cast<double>(i) + 0.5) * scale - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<std::size_t>(std::floor(x));
    const std::size_t hi = std::min(lo + 1, src - 1);
    taps[i] = {lo, hi, static_cast<float>(x - static_cast<double>(lo))};
  }
  return taps;
}

}  // namespace

Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t side) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw ShapeError("resize_bilinear expects a 1xHxW image, got " + shape_string(image.shape()));
  }
  if (side == 0) throw ConfigError("resize target side must be positive");
  const std::size_t h = image.dim(1), w = image.dim(2);
  const std::vector<Tap> ys = bilinear_taps(h, side);
  const std::vector<Tap> xs = bilinear_taps(w, side);
  Tensor<float> out({1, side, side});
  for (std::size_t i = 0; i < side; ++i) {
    const float* r0 = image.data() + ys[i].lo * w;
    const float* r1 = image.data() + ys[i].hi * w;
    const float wy = ys[i].w_hi;
    for (std::size_t j = 0; j < side; ++j) {
      const Tap& t = xs[j];
      const float top = r0[t.lo] + (r0[t.hi] - r0[t.lo]) * t.w_hi;
      const float bottom = r1[t.lo] + (r1[t.hi] - r1[t.lo]) * t.w_hi;
      out[i * side + j] = top + (bottom - top) * wy;
    }
  }
  return out;
}

Tensor<float> load_image(const std::filesystem::path& path, std::size_t side) {
  cv::Mat raw;
  try {
    raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw DataError("cannot decode image " + path.string() + ": " + e.what());
  }
  if (raw.empty()) throw DataError("unreadable image: " + path.string());
  if (raw.rows <= 0 || raw.cols <= 0) throw DataError("zero-sized image: " + path.string());
  if (raw.depth() != CV_8U) throw DataError("only 8-bit images are supported: " + path.string());

  const auto h = static_cast<std::size_t>(raw.rows), w = static_cast<std::size_t>(raw.cols);
  const int channels = raw.channels();
  if (channels != 1 && channels != 3 && channels != 4) {
    throw DataError("unsupported channel count " + std::to_string(channels) + " in " + path.string());
  }
  Tensor<float> gray({1, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    const std::uint8_t* row = raw.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::size_t x = 0; x < w; ++x) {
      float v;
      if (channels == 1) {
        v = static_cast<float>(row[x]);
      } else {
        // OpenCV stores colour pixels as B, G, R(, A).
        const std::uint8_t* px = row + x * static_cast<std::size_t>(channels);
        v = 0.299f * px[2] + 0.587f * px[1] + 0.114f * px[0];
      }
      gray[y * w + x] = v / 255.0f;
    }
  }
  Tensor<float> out = (h == side && w == side) ? gray : resize_bilinear(gray, side);
  for (float& v : out.values()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace cxr
