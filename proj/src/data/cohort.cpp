#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "cxr/csv.hpp"
#include "cxr/data.hpp"
#include "cxr/errors.hpp"
#include "cxr/random.hpp"

namespace cxr {

std::string_view to_string(UncertainPolicy p) {
  switch (p) {
    case UncertainPolicy::exclude:
      return "exclude";
    case UncertainPolicy::as_negative:
      return "as_negative";
    case UncertainPolicy::as_positive:
      return "as_positive";
  }
  return "exclude";
}

std::string_view to_string(ViewFilter f) { return f == ViewFilter::frontal_only ? "frontal_only" : "all"; }

std::string_view to_string(SplitUnit u) { return u == SplitUnit::per_image ? "per_image" : "per_patient"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

UncertainPolicy parse_uncertain_policy(std::string_view text) {
  if (text == "exclude") return UncertainPolicy::exclude;
  if (text == "as_negative") return UncertainPolicy::as_negative;
  if (text == "as_positive") return UncertainPolicy::as_positive;
  throw ConfigError("unknown uncertain policy '" + std::string(text) + "'");
}

ViewFilter parse_view_filter(std::string_view text) {
  if (text == "frontal_only") return ViewFilter::frontal_only;
  if (text == "all") return ViewFilter::all;
  throw ConfigError("unknown view filter '" + std::string(text) + "'");
}

SplitUnit parse_split_unit(std::string_view text) {
  if (text == "per_image") return SplitUnit::per_image;
  if (text == "per_patient") return SplitUnit::per_patient;
  throw ConfigError("unknown split unit '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw DataError("unknown split '" + std::string(text) + "'");
}

std::vector<LabeledRecord> extract_cohort(const Manifest& manifest, std::string_view pathology,
                                          UncertainPolicy policy, ViewFilter filter) {
  const auto it = std::find(manifest.pathologies.begin(), manifest.pathologies.end(), pathology);
  if (it == manifest.pathologies.end()) throw DataError("unknown pathology '" + std::string(pathology) + "'");
  const auto col = static_cast<std::size_t>(it - manifest.pathologies.begin());

  std::vector<LabeledRecord> out;
  for (const ManifestRecord& rec : manifest.records) {
    if (filter == ViewFilter::frontal_only && rec.view != View::frontal) continue;
    bool positive = false;
    switch (rec.labels[col]) {
      case Label::positive:
        positive = true;
        break;
      case Label::negative:
        positive = false;
        break;
      case Label::uncertain:
        if (policy == UncertainPolicy::exclude) continue;
        positive = policy == UncertainPolicy::as_positive;
        break;
      case Label::unmentioned:
        continue;
    }
    out.push_back({rec.path, rec.patient_id, positive});
  }
  if (out.empty()) throw DataError("cohort for '" + std::string(pathology) + "' is empty");
  return out;
}

std::vector<CohortRecord> Cohort::split_records(Split s) const {
  std::vector<CohortRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [s](const CohortRecord& r) { return r.split == s; });
  return out;
}

std::vector<std::size_t> split_sizes(std::size_t units, const SplitRatios& ratios) {
  const double r[3] = {ratios.train, ratios.val, ratios.test};
  for (double v : r) {
    if (!(v > 0.0)) throw ConfigError("split ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (units < 3) throw DataError("need at least 3 split units, got " + std::to_string(units));

  std::vector<std::size_t> sizes(3);
  double fractions[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    // The small offset absorbs products like 0.29 * 100 = 28.999999999999996.
    const double exact = r[i] * static_cast<double>(units) + 1e-9;
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    fractions[i] = exact - std::floor(exact);
    assigned += sizes[i];
  }
  std::vector<int> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fractions[a] > fractions[b]; });
  for (std::size_t k = 0; assigned < units; ++k, ++assigned) ++sizes[static_cast<std::size_t>(order[k % 3])];
  return sizes;
}

Cohort split(const std::vector<LabeledRecord>& records, const SplitRatios& ratios, std::uint64_t seed,
             SplitUnit unit) {
  // Unit index per record; units are numbered in order of first appearance.
  std::vector<std::size_t> unit_of(records.size());
  std::size_t unit_count = 0;
  if (unit == SplitUnit::per_image) {
    for (std::size_t i = 0; i < records.size(); ++i) unit_of[i] = i;
    unit_count = records.size();
  } else {
    std::map<std::string, std::size_t> ids;
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto [it, inserted] = ids.emplace(records[i].patient_id, unit_count);
      if (inserted) ++unit_count;
      unit_of[i] = it->second;
    }
  }

  const std::vector<std::size_t> sizes = split_sizes(unit_count, ratios);
  std::vector<std::size_t> order(unit_count);
  for (std::size_t i = 0; i < unit_count; ++i) order[i] = i;
  Rng rng(seed, {0x73706c6974ULL});
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<Split> unit_split(unit_count);
  for (std::size_t pos = 0; pos < unit_count; ++pos) {
    unit_split[order[pos]] = pos < sizes[0] ? Split::train : pos < sizes[0] + sizes[1] ? Split::val : Split::test;
  }

  Cohort cohort;
  cohort.seed = seed;
  cohort.unit = unit;
  for (std::size_t i = 0; i < records.size(); ++i) {
    cohort.records.push_back({records[i].path, records[i].patient_id, records[i].positive, unit_split[unit_of[i]]});
  }
  return cohort;
}

void write_cohort(std::ostream& out, const Cohort& cohort, const std::vector<std::string>& comments) {
  for (const std::string& c : comments) out << "# " << c << '\n';
  out << "# pathology=" << cohort.pathology << '\n';
  out << "# seed=" << cohort.seed << '\n';
  out << "# split_unit=" << to_string(cohort.unit) << '\n';
  out << "# uncertain_policy=" << to_string(cohort.policy) << '\n';
  out << "path,label,split\n";
  for (const CohortRecord& r : cohort.records) {
    csv::write_row(out, {r.path, r.positive ? "1" : "0", std::string(to_string(r.split))});
  }
}

Cohort read_cohort(std::istream& in) {
  Cohort cohort;
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string body = line.substr(line.find_first_not_of("# ") == std::string::npos
                                               ? line.size()
                                               : line.find_first_not_of("# "));
      const std::size_t eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = body.substr(0, eq), value = body.substr(eq + 1);
      try {
        if (key == "pathology") cohort.pathology = value;
        if (key == "seed") cohort.seed = std::stoull(value);
        if (key == "split_unit") cohort.unit = parse_split_unit(value);
        if (key == "uncertain_policy") cohort.policy = parse_uncertain_policy(value);
      } catch (const std::exception&) {
        throw DataError("cohort line " + std::to_string(line_number) + ": bad metadata value for " + key);
      }
      continue;
    }
    if (!have_header) {
      if (csv::split_line(line) != std::vector<std::string>{"path", "label", "split"}) {
        throw DataError("cohort header must be 'path,label,split'");
      }
      have_header = true;
      continue;
    }
    const std::vector<std::string> cells = csv::split_line(line);
    if (cells.size() != 3) throw DataError("cohort line " + std::to_string(line_number) + ": expected 3 fields");
    if (cells[1] != "0" && cells[1] != "1") {
      throw DataError("cohort line " + std::to_string(line_number) + ": label must be 0 or 1");
    }
    CohortRecord r;
    r.path = cells[0];
    r.positive = cells[1] == "1";
    r.split = parse_split(cells[2]);
    cohort.records.push_back(std::move(r));
  }
  if (!have_header) throw DataError("cohort file has no header");
  return cohort;
}

Cohort read_cohort(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cohort: " + path.string());
  return read_cohort(in);
}

CohortCounts count_cohort(const Cohort& cohort) {
  CohortCounts counts;
  for (const CohortRecord& r : cohort.records) {
    SplitCounts& s = r.split == Split::train ? counts.train : r.split == Split::val ? counts.val : counts.test;
    (r.positive ? s.positive : s.negative) += 1;
  }
  return counts;
}

}  // namespace cxr
