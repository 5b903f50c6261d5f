#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "cxr/csv.hpp"
#include "cxr/data.hpp"
#include "cxr/errors.hpp"

namespace cxr {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

Label parse_label(const std::string& cell, std::size_t row, const std::string& column) {
  const std::string text = trim(cell);
  if (text.empty()) return Label::unmentioned;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() + text.size()) {
    if (v == 1.0) return Label::positive;
    if (v == 0.0) return Label::negative;
    if (v == -1.0) return Label::uncertain;
  }
  throw DataError("manifest row " + std::to_string(row) + ": unparseable label '" + cell + "' in column " + column);
}

std::string label_cell(Label label) {
  switch (label) {
    case Label::positive:
      return "1.0";
    case Label::negative:
      return "0.0";
    case Label::uncertain:
      return "-1.0";
    case Label::unmentioned:
      return "";
  }
  return "";
}

std::string patient_from_path(const std::string& path) {
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t slash = path.find('/', start);
    const std::size_t end = slash == std::string::npos ? path.size() : slash;
    const std::string segment = path.substr(start, end - start);
    if (segment.size() > 7 && segment.compare(0, 7, "patient") == 0 &&
        std::all_of(segment.begin() + 7, segment.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return segment;
    }
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return path;
}

}  // namespace

const std::vector<std::string>& chexpert_pathologies() {
  static const std::vector<std::string> names{
      "No Finding",   "Enlarged Cardiomediastinum", "Cardiomegaly",     "Lung Opacity", "Lung Lesion",
      "Edema",        "Consolidation",              "Pneumonia",        "Atelectasis",  "Pneumothorax",
      "Pleural Effusion", "Pleural Other",          "Fracture",         "Support Devices"};
  return names;
}

Manifest parse_manifest(std::istream& in) {
  std::size_t line_number = 0;
  const auto header_line = csv::next_data_line(in, line_number);
  if (!header_line) throw DataError("manifest is empty (no header row)");
  const std::vector<std::string> header = csv::split_line(*header_line);

  auto column = [&](const std::string& name) -> std::ptrdiff_t {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const std::ptrdiff_t path_col = column("Path");
  const std::ptrdiff_t view_col = column("Frontal/Lateral");
  const std::ptrdiff_t proj_col = column("AP/PA");
  const std::ptrdiff_t sex_col = column("Sex");
  const std::ptrdiff_t age_col = column("Age");
  for (const auto& [idx, name] : {std::pair{path_col, "Path"}, std::pair{view_col, "Frontal/Lateral"},
                                  std::pair{proj_col, "AP/PA"}}) {
    if (idx < 0) throw DataError(std::string("manifest is missing mandatory column ") + name);
  }

  Manifest manifest;
  std::vector<std::size_t> pathology_cols;
  for (std::size_t c = static_cast<std::size_t>(proj_col) + 1; c < header.size(); ++c) {
    manifest.pathologies.push_back(header[c]);
    pathology_cols.push_back(c);
  }
  if (manifest.pathologies.empty()) throw DataError("manifest has no pathology columns after AP/PA");

  std::size_t row = 0;
  while (const auto line = csv::next_data_line(in, line_number)) {
    ++row;
    const std::vector<std::string> cells = csv::split_line(*line);
    if (cells.size() != header.size()) {
      throw DataError("manifest row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(cells.size()));
    }
    ManifestRecord rec;
    rec.path = cells[static_cast<std::size_t>(path_col)];
    const std::string view = trim(cells[static_cast<std::size_t>(view_col)]);
    if (view == "Frontal") {
      rec.view = View::frontal;
    } else if (view == "Lateral") {
      rec.view = View::lateral;
    } else {
      throw DataError("manifest row " + std::to_string(row) + ": unknown view '" + view + "'");
    }
    const std::string proj = trim(cells[static_cast<std::size_t>(proj_col)]);
    rec.projection = proj == "AP" ? Projection::ap : proj == "PA" ? Projection::pa : Projection::unknown;
    rec.patient_id = patient_from_path(rec.path);
    if (sex_col >= 0) rec.sex = cells[static_cast<std::size_t>(sex_col)];
    if (age_col >= 0) rec.age = cells[static_cast<std::size_t>(age_col)];
    for (std::size_t i = 0; i < pathology_cols.size(); ++i) {
      rec.labels.push_back(parse_label(cells[pathology_cols[i]], row, manifest.pathologies[i]));
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  return parse_manifest(in);
}

void write_manifest(std::ostream& out, const Manifest& manifest) {
  std::vector<std::string> header{"Path", "Sex", "Age", "Frontal/Lateral", "AP/PA"};
  header.insert(header.end(), manifest.pathologies.begin(), manifest.pathologies.end());
  csv::write_row(out, header);
  for (const ManifestRecord& rec : manifest.records) {
    std::vector<std::string> row{rec.path, rec.sex, rec.age, rec.view == View::frontal ? "Frontal" : "Lateral",
                                 rec.projection == Projection::ap   ? "AP"
                                 : rec.projection == Projection::pa ? "PA"
                                                                    : ""};
    for (Label l : rec.labels) row.push_back(label_cell(l));
    csv::write_row(out, row);
  }
}

}  // namespace cxr
