#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/tensor.hpp"

namespace cxr {

// ---------------------------------------------------------------------------
// Manifest (CheXpert-style CSV)

enum class View { frontal, lateral };
enum class Projection { ap, pa, unknown };
enum class Label { positive, negative, uncertain, unmentioned };

struct ManifestRecord {
  std::string path;
  View view = View::frontal;
  Projection projection = Projection::unknown;
  /// The "patientNNNNN" path segment; the whole path when there is none.
  std::string patient_id;
  /// Aligned with Manifest::pathologies.
  std::vector<Label> labels;
  /// Sex and Age cells, kept verbatim for re-emission.
  std::string sex;
  std::string age;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::vector<std::string> pathologies;
  std::vector<ManifestRecord> records;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// The fourteen CheXpert observation columns, in CheXpert order.
const std::vector<std::string>& chexpert_pathologies();

/// Reads a manifest with a header containing Path, Frontal/Lateral and AP/PA;
/// every column after AP/PA is a pathology. Label cells: 1.0 positive, 0.0
/// negative, -1.0 uncertain, empty unmentioned.
Manifest parse_manifest(std::istream& in);
Manifest read_manifest(const std::filesystem::path& path);

/// Emits the CheXpert column layout (Path,Sex,Age,Frontal/Lateral,AP/PA,pathologies...).
void write_manifest(std::ostream& out, const Manifest& manifest);

// ---------------------------------------------------------------------------
// Cohorts

enum class UncertainPolicy { exclude, as_negative, as_positive };
enum class ViewFilter { frontal_only, all };
enum class SplitUnit { per_image, per_patient };
enum class Split { train, val, test };

std::string_view to_string(UncertainPolicy p);
std::string_view to_string(ViewFilter f);
std::string_view to_string(SplitUnit u);
std::string_view to_string(Split s);
UncertainPolicy parse_uncertain_policy(std::string_view text);
ViewFilter parse_view_filter(std::string_view text);
SplitUnit parse_split_unit(std::string_view text);
Split parse_split(std::string_view text);

struct LabeledRecord {
  std::string path;
  std::string patient_id;
  bool positive = false;

  friend bool operator==(const LabeledRecord&, const LabeledRecord&) = default;
};

/// Applies the view filter, then resolves uncertain/unmentioned labels per
/// policy (exclude drops both; as_* maps uncertain and drops unmentioned).
std::vector<LabeledRecord> extract_cohort(const Manifest& manifest, std::string_view pathology,
                                          UncertainPolicy policy = UncertainPolicy::exclude,
                                          ViewFilter filter = ViewFilter::frontal_only);

struct SplitRatios {
  double train = 0.64;
  double val = 0.16;
  double test = 0.20;
};

struct CohortRecord {
  std::string path;
  std::string patient_id;
  bool positive = false;
  Split split = Split::train;

  friend bool operator==(const CohortRecord&, const CohortRecord&) = default;
};

struct Cohort {
  std::string pathology;
  std::vector<CohortRecord> records;
  std::uint64_t seed = 0;
  SplitUnit unit = SplitUnit::per_image;
  UncertainPolicy policy = UncertainPolicy::exclude;

  std::vector<CohortRecord> split_records(Split s) const;
};

/// Unit counts per split: floor(r * N) each, then the remainder to the splits
/// with the largest fractional parts (ties in train, val, test order).
std::vector<std::size_t> split_sizes(std::size_t units, const SplitRatios& ratios);

/// Seeded shuffle of split units followed by contiguous assignment.
Cohort split(const std::vector<LabeledRecord>& records, const SplitRatios& ratios, std::uint64_t seed,
             SplitUnit unit = SplitUnit::per_image);

/// Cohort file: header "path,label,split"; optional leading '#' comment lines.
void write_cohort(std::ostream& out, const Cohort& cohort, const std::vector<std::string>& comments = {});
Cohort read_cohort(std::istream& in);
Cohort read_cohort(const std::filesystem::path& path);

struct SplitCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

struct CohortCounts {
  SplitCounts train, val, test;
  SplitCounts train_val() const { return {train.positive + val.positive, train.negative + val.negative}; }
  SplitCounts total() const {
    return {train.positive + val.positive + test.positive, train.negative + val.negative + test.negative};
  }
};

CohortCounts count_cohort(const Cohort& cohort);

// ---------------------------------------------------------------------------
// Images

/// Bilinear resize of a 1 x H x W tensor to 1 x side x side using the
/// half-pixel (align_corners = false) convention with edge clamping.
Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t side);

/// Decodes an 8-bit grayscale/RGB(A) PNG or JPEG, converts to luminance
/// (0.299 R + 0.587 G + 0.114 B), scales to [0, 1] and resizes to side x side.
Tensor<float> load_image(const std::filesystem::path& path, std::size_t side);

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  std::size_t side = 32;
  std::size_t train_count = 800;
  std::size_t val_count = 200;
  std::size_t test_count = 250;
  double positive_fraction = 0.112;
  double radius_min = 2.0;
  double radius_max = 4.0;
  double contrast_min = 0.2;
  double contrast_max = 0.35;
  double noise_std = 0.03;
  std::uint64_t seed = 0;
  /// Manifest column that carries the synthetic label.
  std::string pathology = "Lung Lesion";

  void validate() const;
  std::size_t total() const { return train_count + val_count + test_count; }
};

struct SyntheticImage {
  std::string path;  // relative to the output directory
  bool positive = false;
  /// Mean of the quantized background (before any blob), in [0, 1].
  double background_mean = 0.0;
  double radius = 0.0;
  double contrast = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
};

struct SyntheticSummary {
  std::vector<SyntheticImage> images;
  std::size_t positives = 0;
};

/// Writes PNG images under out_dir/images and out_dir/manifest.csv.
/// Negatives: smooth low-frequency background plus Gaussian noise. Positives:
/// the same plus one bright disk whose pixels are at least
/// background_mean + contrast.
SyntheticSummary generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace cxr
