#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "cxr/data.hpp"
#include "cxr/errors.hpp"
#include "cxr/random.hpp"

namespace cxr {

namespace {

// Background field: level + three low-frequency cosines (< 1.5 cycles per image).
constexpr double kLevelMin = 0.30;
constexpr double kLevelMax = 0.45;
constexpr double kWaveAmplitudeMax = 0.05;
constexpr double kWaveFrequencyMax = 1.5;
constexpr int kWaves = 3;
// Upper bound on the background mean, so a disk at mean + contrast never clips.
constexpr double kBackgroundCeiling = kLevelMax + kWaves * kWaveAmplitudeMax;

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L)); }

std::string image_path(std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "images/patient%05zu/study1/view1_frontal.png", index + 1);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (side < 8) throw ConfigError("synthetic image side must be at least 8");
  if (total() == 0) throw ConfigError("synthetic dataset needs at least one image");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
    throw ConfigError("positive_fraction must lie in (0, 1)");
  }
  if (!(radius_min >= 2.0) || radius_max < radius_min) throw ConfigError("blob radius range must satisfy 2 <= min <= max");
  if (2.0 * radius_max > static_cast<double>(side) - 1.0) throw ConfigError("blob radius too large for the image side");
  if (!(contrast_min > 0.0) || contrast_max < contrast_min) throw ConfigError("blob contrast range must be positive");
  if (kBackgroundCeiling + contrast_max > 0.98) {
    throw ConfigError("contrast_max too large: blobs would saturate (max " + std::to_string(0.98 - kBackgroundCeiling) +
                      ")");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
}

SyntheticSummary generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const std::size_t total = spec.total();
  const auto positives = static_cast<std::size_t>(std::llround(spec.positive_fraction * static_cast<double>(total)));
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  Rng label_rng(spec.seed, {0x6c6162656cULL});
  label_rng.shuffle(std::span<std::size_t>(order));
  std::vector<bool> is_positive(total, false);
  for (std::size_t i = 0; i < positives; ++i) is_positive[order[i]] = true;

  Manifest manifest;
  manifest.pathologies = chexpert_pathologies();
  const auto column = static_cast<std::size_t>(
      std::find(manifest.pathologies.begin(), manifest.pathologies.end(), spec.pathology) -
      manifest.pathologies.begin());
  if (column == manifest.pathologies.size()) {
    throw ConfigError("synthetic pathology '" + spec.pathology + "' is not a CheXpert column");
  }

  SyntheticSummary summary;
  summary.positives = positives;
  const std::size_t side = spec.side;
  for (std::size_t idx = 0; idx < total; ++idx) {
    Rng rng(spec.seed, {0x696d616765ULL, idx});
    const double level = rng.uniform(kLevelMin, kLevelMax);
    double amp[kWaves], fx[kWaves], fy[kWaves], phase[kWaves];
    for (int k = 0; k < kWaves; ++k) {
      amp[k] = rng.uniform(0.0, kWaveAmplitudeMax);
      fx[k] = rng.uniform(-kWaveFrequencyMax, kWaveFrequencyMax);
      fy[k] = rng.uniform(-kWaveFrequencyMax, kWaveFrequencyMax);
      phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }

    cv::Mat img(static_cast<int>(side), static_cast<int>(side), CV_8UC1);
    double sum = 0.0;
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        double v = level;
        for (int k = 0; k < kWaves; ++k) {
          v += amp[k] * std::cos(2.0 * std::numbers::pi * (fx[k] * static_cast<double>(x) + fy[k] * static_cast<double>(y)) /
                                     static_cast<double>(side) +
                                 phase[k]);
        }
        v += spec.noise_std * rng.normal();
        const std::uint8_t q = quantize(v);
        img.at<std::uint8_t>(static_cast<int>(y), static_cast<int>(x)) = q;
        sum += q;
      }
    }

    SyntheticImage info;
    info.path = image_path(idx);
    info.positive = is_positive[idx];
    info.background_mean = sum / static_cast<double>(side * side) / 255.0;
    if (info.positive) {
      info.radius = rng.uniform(spec.radius_min, spec.radius_max);
      info.contrast = rng.uniform(spec.contrast_min, spec.contrast_max);
      const double hi = static_cast<double>(side) - 1.0 - info.radius;
      info.center_x = rng.uniform(info.radius, hi);
      info.center_y = rng.uniform(info.radius, hi);
      const double floor_value = info.background_mean + info.contrast;
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
          const double dx = static_cast<double>(x) - info.center_x, dy = static_cast<double>(y) - info.center_y;
          if (dx * dx + dy * dy > info.radius * info.radius) continue;
          const double v = floor_value + std::abs(spec.noise_std * rng.normal());
          // Round up so the quantized disk never drops below the floor.
          const double q = std::min(255.0, std::ceil(v * 255.0 - 1e-9));
          img.at<std::uint8_t>(static_cast<int>(y), static_cast<int>(x)) = static_cast<std::uint8_t>(q);
        }
      }
    }

    const std::filesystem::path file = out_dir / info.path;
    std::filesystem::create_directories(file.parent_path(), ec);
    if (ec) throw DataError("cannot create directory " + file.parent_path().string() + ": " + ec.message());
    bool written = false;
    try {
      written = cv::imwrite(file.string(), img);
    } catch (const cv::Exception& e) {
      throw DataError("cannot write image " + file.string() + ": " + e.what());
    }
    if (!written) throw DataError("cannot write image " + file.string());

    ManifestRecord rec;
    rec.path = info.path;
    rec.view = View::frontal;
    rec.projection = rng.uniform() < 0.5 ? Projection::ap : Projection::pa;
    rec.sex = rng.uniform() < 0.5 ? "Female" : "Male";
    rec.age = std::to_string(20 + rng.below(70));
    rec.patient_id = "patient" + info.path.substr(std::string("images/patient").size(), 5);
    rec.labels.assign(manifest.pathologies.size(), Label::unmentioned);
    rec.labels[column] = info.positive ? Label::positive : Label::negative;
    manifest.records.push_back(std::move(rec));
    summary.images.push_back(std::move(info));
  }

  std::ofstream out(out_dir / "manifest.csv");
  if (!out) throw DataError("cannot write manifest in " + out_dir.string());
  write_manifest(out, manifest);
  if (!out) throw DataError("failed writing manifest in " + out_dir.string());
  return summary;
}

}  // namespace cxr
