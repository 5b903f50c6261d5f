#include "json.hpp"

#include <cmath>
#include <cstdio>

#include "cxr/csv.hpp"
#include "cxr/evaluation.hpp"

namespace cxr {

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_report_json(std::ostream& out, const EvalReport& report) {
  nlohmann::ordered_json j;
  j["auc"] = report.auc;
  j["threshold"] = report.threshold;
  j["f1_pos"] = report.f1_pos;
  j["f1_neg"] = report.f1_neg;
  j["f1_macro"] = report.f1_macro;
  j["tp"] = report.counts.tp;
  j["fp"] = report.counts.fp;
  j["tn"] = report.counts.tn;
  j["fn"] = report.counts.fn;
  j["n_pos"] = report.n_pos;
  j["n_neg"] = report.n_neg;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.metadata) meta[k] = v;
  j["metadata"] = meta;
  out << j.dump(2) << '\n';
}

void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve, const std::vector<std::string>& comments) {
  for (const std::string& c : comments) out << "# " << c << '\n';
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve) csv::write_row(out, {g17(p.threshold), g17(p.fpr), g17(p.tpr)});
}

void write_roc_svg(std::ostream& out, std::span<const RocPoint> curve, double auc_value, const std::string& title) {
  constexpr double kSize = 400.0, kMargin = 50.0;
  auto px = [&](double fpr) { return fixed(kMargin + fpr * kSize, 2); };
  auto py = [&](double tpr) { return fixed(kMargin + (1.0 - tpr) * kSize, 2); };
  const std::string total = fixed(kSize + 2 * kMargin, 0);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total << "\" height=\"" << total << "\">\n";
  out << "  <rect x=\"" << px(0) << "\" y=\"" << py(1) << "\" width=\"" << fixed(kSize, 0) << "\" height=\""
      << fixed(kSize, 0) << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
      << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    out << "  <text x=\"" << px(v) << "\" y=\"" << fixed(kMargin + kSize + 18, 0) << "\" font-size=\"11\" text-anchor=\"middle\">"
        << fixed(v, 2) << "</text>\n";
    out << "  <text x=\"" << fixed(kMargin - 6, 0) << "\" y=\"" << py(v) << "\" font-size=\"11\" text-anchor=\"end\">"
        << fixed(v, 2) << "</text>\n";
  }
  out << "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < curve.size(); ++i) out << (i ? " " : "") << px(curve[i].fpr) << ',' << py(curve[i].tpr);
  out << "\"/>\n";
  out << "  <text x=\"" << px(0.5) << "\" y=\"" << fixed(kMargin - 20, 0) << "\" font-size=\"14\" text-anchor=\"middle\">"
      << title << " (AUC " << fixed(auc_value, 4) << ")</text>\n";
  out << "  <text x=\"" << px(0.5) << "\" y=\"" << fixed(kMargin + kSize + 40, 0)
      << "\" font-size=\"12\" text-anchor=\"middle\">False positive rate</text>\n";
  out << "  <text x=\"15\" y=\"" << py(0.5) << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << py(0.5) << ")\">True positive rate</text>\n";
  out << "</svg>\n";
}

}  // namespace cxr
