#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "cxr/checkpoint.hpp"
#include "cxr/cli.hpp"
#include "cxr/errors.hpp"

namespace cxr {

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> pathology;
  std::optional<std::string> preset;
  std::optional<std::string> cohort;
  std::optional<std::string> manifest;
  std::optional<std::string> checkpoint;
  std::optional<std::string> init;
  std::optional<std::string> out;
  std::optional<double> threshold;
  std::optional<std::string> uncertain;
  std::optional<std::string> split_unit;
};

// Published cohort sizes: (train+val positive, negative), (test positive, negative).
struct ReferenceCounts {
  std::size_t trval_pos, trval_neg, test_pos, test_neg;
  std::size_t stated_pos, stated_neg;
};

const std::map<std::string, ReferenceCounts>& reference_counts() {
  static const std::map<std::string, ReferenceCounts> table{
      {"Lung Lesion", {935, 7430, 335, 1756, 1270, 9189}},
      {"Cardiomegaly", {8552, 21941, 2564, 5059, 11116, 27000}},
  };
  return table;
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config ? load_run_config(*f.config) : RunConfig{};
  if (f.seed) c.seed = *f.seed;
  if (f.pathology) c.pathology = *f.pathology;
  if (f.preset) c.preset = *f.preset;
  if (f.cohort) c.cohort = *f.cohort;
  if (f.manifest) c.manifest = *f.manifest;
  if (f.checkpoint) c.checkpoint = *f.checkpoint;
  if (f.init) c.init_checkpoint = *f.init;
  if (f.out) c.out = *f.out;
  if (f.threshold) c.threshold = *f.threshold;
  if (f.uncertain) c.uncertain = parse_uncertain_policy(*f.uncertain);
  if (f.split_unit) c.split_unit = parse_split_unit(*f.split_unit);
  c.train.seed = c.seed;
  c.synthetic.seed = c.seed;
  c.synthetic.pathology = c.pathology;
  return c;
}

// Shortest text that parses back to the same double.
std::string g17(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> comment_lines(const RunConfig& c) {
  std::vector<std::string> lines{"seed=" + std::to_string(c.seed)};
  for (const auto& [k, v] : run_config_entries(c)) lines.push_back(k + "=" + v);
  return lines;
}

void require_file(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("missing required ") + what);
  if (!std::filesystem::exists(p)) throw DataError(std::string(what) + " not found: " + p.string());
}

std::filesystem::path prepare_out(const RunConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) throw DataError("cannot create output directory " + c.out.string() + ": " + ec.message());
  return c.out;
}

std::ofstream open_out(const std::filesystem::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(p, mode);
  if (!f) throw DataError("cannot write " + p.string());
  return f;
}

std::string lookup(const CheckpointInfo& info, const std::string& key, const std::string& fallback = {}) {
  for (const auto& [k, v] : info.extra) {
    if (k == key) return v;
  }
  return fallback;
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& c, std::ostream& out) {
  const std::filesystem::path dir = prepare_out(c);
  const SyntheticSummary summary = generate_synthetic(c.synthetic, dir);
  auto meta = open_out(dir / "synthetic.json");
  meta << "{\"seed\":" << c.seed << ",\"images\":" << summary.images.size() << ",\"positives\":" << summary.positives
       << ",\"run_config\":" << run_config_json(c) << "}\n";
  out << "images=" << summary.images.size() << " positives=" << summary.positives << " manifest="
      << (dir / "manifest.csv").string() << '\n';
  return kExitOk;
}

int cmd_prepare(const RunConfig& c, std::ostream& out) {
  if (c.manifest.empty()) throw ConfigError("prepare requires --manifest");
  require_file(c.manifest, "manifest");
  Manifest manifest = read_manifest(c.manifest);
  const std::filesystem::path root = std::filesystem::absolute(c.manifest).parent_path();
  for (ManifestRecord& r : manifest.records) {
    const std::filesystem::path p(r.path);
    if (!p.is_absolute()) r.path = (root / p).lexically_normal().string();
  }
  const std::vector<LabeledRecord> labeled = extract_cohort(manifest, c.pathology, c.uncertain, c.view_filter);
  Cohort cohort = split(labeled, SplitRatios{}, c.seed, c.split_unit);
  cohort.pathology = c.pathology;
  cohort.policy = c.uncertain;

  const std::filesystem::path dir = prepare_out(c);
  auto f = open_out(dir / "cohort.csv");
  write_cohort(f, cohort, {"run_config=" + run_config_json(c)});

  const CohortCounts n = count_cohort(cohort);
  const SplitCounts tv = n.train_val(), all = n.total();
  char line[160];
  out << "pathology=" << c.pathology << " uncertain=" << to_string(c.uncertain)
      << " split_unit=" << to_string(c.split_unit) << " seed=" << c.seed << '\n';
  std::snprintf(line, sizeof(line), "%-18s %8s %8s %8s %8s\n", "", "tv_pos", "tv_neg", "test_pos", "test_neg");
  out << line;
  std::snprintf(line, sizeof(line), "%-18s %8zu %8zu %8zu %8zu\n", "this cohort", tv.positive, tv.negative,
                n.test.positive, n.test.negative);
  out << line;
  const auto ref = reference_counts().find(c.pathology);
  if (ref != reference_counts().end()) {
    const ReferenceCounts& r = ref->second;
    std::snprintf(line, sizeof(line), "%-18s %8zu %8zu %8zu %8zu\n", "published", r.trval_pos, r.trval_neg,
                  r.test_pos, r.test_neg);
    out << line;
    out << "published extraction totals: positive=" << r.stated_pos << " negative=" << r.stated_neg;
    if (r.trval_neg + r.test_neg != r.stated_neg) {
      out << " (split negatives sum to " << r.trval_neg + r.test_neg << ")";
    }
    out << '\n';
  }
  out << "train: pos=" << n.train.positive << " neg=" << n.train.negative << "  val: pos=" << n.val.positive
      << " neg=" << n.val.negative << "  test: pos=" << n.test.positive << " neg=" << n.test.negative
      << "  total: pos=" << all.positive << " neg=" << all.negative << '\n';
  if (tv.positive > 0 && tv.negative > 0) {
    const ClassWeights w = class_weights(tv.positive, tv.negative);
    out << "class_weights: w_p=" << g17(w.positive) << " w_n=" << g17(w.negative) << '\n';
  }
  out << "cohort=" << (dir / "cohort.csv").string() << '\n';
  return kExitOk;
}

// Dataset-mode statistics always come from the training split.
std::vector<Tensor<float>> load_raw(const Cohort& cohort, Split s, const std::filesystem::path& root,
                                    std::size_t side, std::vector<CohortRecord>& records) {
  records = cohort.split_records(s);
  if (records.empty()) throw DataError(std::string(to_string(s)) + " split is empty");
  return load_images(records, root, side);
}

int cmd_train(RunConfig c, std::ostream& out, std::ostream& err) {
  if (c.cohort.empty()) throw ConfigError("train requires --cohort");
  require_file(c.cohort, "cohort");
  const Cohort cohort = read_cohort(c.cohort);
  if (!cohort.pathology.empty()) c.pathology = cohort.pathology;
  const DenseNetConfig net_config = c.network();
  c.train.validate();
  const std::filesystem::path root = std::filesystem::absolute(c.cohort).parent_path();

  std::vector<CohortRecord> train_records, val_records;
  const auto train_raw = load_raw(cohort, Split::train, root, net_config.input_size, train_records);
  const auto val_raw = load_raw(cohort, Split::val, root, net_config.input_size, val_records);
  const PixelStats train_stats =
      c.train.normalization == NormalizationMode::dataset ? pixel_stats(train_raw) : PixelStats{};
  const ImageSet train_set =
      make_image_set(train_raw, train_records, net_config.input_channels, c.train.normalization, train_stats);
  const ImageSet val_set =
      make_image_set(val_raw, val_records, net_config.input_channels, c.train.normalization, train_stats);

  const CohortCounts counts = count_cohort(cohort);
  const SplitCounts tv = counts.train_val();
  const ClassWeights weights = c.train.weighting == ClassWeighting::unit ? unit_class_weights(tv.positive, tv.negative)
                                                                         : class_weights(tv.positive, tv.negative);
  err << "training " << train_set.size() << " images (" << train_set.positives() << " positive), validating on "
      << val_set.size() << "; w_p=" << g17(weights.positive) << " w_n=" << g17(weights.negative) << '\n';

  const bool imported = !c.init_checkpoint.empty();
  if (imported) require_file(c.init_checkpoint, "initial checkpoint");
  const Network initial = imported ? load_checkpoint(c.init_checkpoint, net_config).network : Network(net_config, c.seed);
  TrainResult result = train(initial, train_set, val_set, c.train, weights,
                             [&](std::size_t epoch, double tl, double vl) {
                               err << "epoch " << epoch << "/" << c.train.epochs << " train_loss=" << g17(tl)
                                   << " val_loss=" << g17(vl) << '\n';
                             });

  CheckpointInfo info = result.best.info;
  info.extra = {{"pathology", c.pathology},
                {"initialization", imported ? "checkpoint" : "random"},
                {"normalization", std::string(to_string(c.train.normalization))},
                {"norm_mean", g17(train_stats.mean)},
                {"norm_std", g17(train_stats.std)},
                {"class_weight_positive", g17(weights.positive)},
                {"class_weight_negative", g17(weights.negative)}};
  for (const auto& kv : run_config_entries(c)) info.extra.push_back(kv);

  const std::filesystem::path dir = prepare_out(c);
  save_checkpoint(result.best.network, info, dir / "checkpoint.cxr");
  auto hist = open_out(dir / "history.csv");
  write_history_csv(hist, result.history, comment_lines(c));
  out << "best_epoch=" << result.history.best_epoch << " val_loss=" << g17(info.val_loss)
      << " checkpoint=" << (dir / "checkpoint.cxr").string() << '\n';
  return kExitOk;
}

int cmd_evaluate(RunConfig c, std::ostream& out) {
  if (c.checkpoint.empty()) throw ConfigError("evaluate requires --checkpoint");
  if (c.cohort.empty()) throw ConfigError("evaluate requires --cohort");
  require_file(c.checkpoint, "checkpoint");
  require_file(c.cohort, "cohort");
  const Checkpoint ckpt = load_checkpoint(c.checkpoint);
  const Cohort cohort = read_cohort(c.cohort);
  if (!cohort.pathology.empty()) c.pathology = cohort.pathology;
  const DenseNetConfig& net = ckpt.network.config();
  const std::filesystem::path root = std::filesystem::absolute(c.cohort).parent_path();

  const NormalizationMode mode = parse_normalization_mode(lookup(ckpt.info, "normalization", "per_image"));
  PixelStats stats;
  if (mode == NormalizationMode::dataset) {
    try {
      stats = {std::stod(lookup(ckpt.info, "norm_mean")), std::stod(lookup(ckpt.info, "norm_std"))};
    } catch (const std::exception&) {
      throw FormatError("checkpoint lacks dataset normalization statistics");
    }
  }
  auto load = [&](Split s) {
    std::vector<CohortRecord> records;
    const auto raw = load_raw(cohort, s, root, net.input_size, records);
    return make_image_set(raw, records, net.input_channels, mode, stats);
  };

  std::string source = "flag";
  double threshold = 0.0, objective_value = 0.0;
  if (c.threshold) {
    threshold = *c.threshold;
  } else {
    const ThresholdChoice choice = select_threshold(score(ckpt.network, load(Split::val)), c.objective);
    threshold = choice.threshold;
    objective_value = choice.objective;
    source = "validation_" + std::string(to_string(c.objective));
  }
  EvalReport report = evaluate(ckpt.network, load(Split::test), threshold);
  report.metadata = {{"pathology", c.pathology},
                     {"seed", std::to_string(ckpt.info.seed)},
                     {"checkpoint_epoch", std::to_string(ckpt.info.epoch)},
                     {"threshold_source", source},
                     {"validation_objective", g17(objective_value)}};
  const double ref = reference_auc(c.pathology);
  if (ref == ref) report.metadata.emplace_back("reference_auc_full_scale", g17(ref));
  report.metadata.emplace_back("train_run_config", lookup(ckpt.info, "run_config"));
  for (const auto& kv : run_config_entries(c)) report.metadata.push_back(kv);

  const std::filesystem::path dir = prepare_out(c);
  auto json_file = open_out(dir / "report.json");
  write_report_json(json_file, report);
  auto roc_file = open_out(dir / "roc.csv");
  write_roc_csv(roc_file, report.roc, comment_lines(c));
  auto svg_file = open_out(dir / "roc.svg");
  write_roc_svg(svg_file, report.roc, report.auc, c.pathology);
  out << "auc=" << g17(report.auc) << " threshold=" << g17(report.threshold) << " f1_macro=" << g17(report.f1_macro)
      << " tp=" << report.counts.tp << " fp=" << report.counts.fp << " tn=" << report.counts.tn
      << " fn=" << report.counts.fn << '\n';
  return kExitOk;
}

int cmd_params(const RunConfig& c, std::ostream& out) {
  std::size_t trainable = 0, frozen = 0;
  for (const ParameterSpec& spec : parameter_specs(c.network())) {
    (spec.trainable ? trainable : frozen) += shape_size(spec.shape);
  }
  out << "trainable=" << trainable << " non_trainable=" << frozen << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cxrnet: DenseNet binary chest X-ray classifier"};
  app.name("cxrnet");
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--out", f.out, "output directory");
  };
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  common(synth);
  synth->add_option("--pathology", f.pathology, "manifest column for the synthetic label");

  CLI::App* prepare = app.add_subcommand("prepare", "build a cohort file from a manifest");
  common(prepare);
  prepare->add_option("--manifest", f.manifest, "CheXpert-style manifest CSV");
  prepare->add_option("--pathology", f.pathology, "pathology column");
  prepare->add_option("--uncertain", f.uncertain, "exclude | as_negative | as_positive");
  prepare->add_option("--split-unit", f.split_unit, "per_image | per_patient");

  CLI::App* train_cmd = app.add_subcommand("train", "train and keep the least-validation-loss checkpoint");
  common(train_cmd);
  train_cmd->add_option("--cohort", f.cohort, "cohort CSV");
  train_cmd->add_option("--preset", f.preset, "network preset");
  train_cmd->add_option("--init", f.init, "checkpoint with starting weights (default: random initialization)");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "ROC/AUC and F1 report on the test split");
  common(eval_cmd);
  eval_cmd->add_option("--cohort", f.cohort, "cohort CSV");
  eval_cmd->add_option("--checkpoint", f.checkpoint, "checkpoint file");
  eval_cmd->add_option("--threshold", f.threshold, "fixed decision threshold (default: chosen on validation)");

  CLI::App* params = app.add_subcommand("params", "print parameter counts");
  params->add_option("--config", f.config, "JSON run configuration");
  params->add_option("--preset", f.preset, "network preset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    const RunConfig config = resolve(f);
    if (synth->parsed()) return cmd_synth(config, out);
    if (prepare->parsed()) return cmd_prepare(config, out);
    if (train_cmd->parsed()) return cmd_train(config, out, err);
    if (eval_cmd->parsed()) return cmd_evaluate(config, out);
    return cmd_params(config, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace cxr
