#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cxr/errors.hpp"
#include "cxr/evaluation.hpp"
#include "json.hpp"
#include "oracles.hpp"

namespace {

cxr::ScoredSet make(std::vector<double> pos, std::vector<double> neg) {
  cxr::ScoredSet s;
  for (double v : pos) {
    s.scores.push_back(v);
    s.labels.push_back(true);
  }
  for (double v : neg) {
    s.scores.push_back(v);
    s.labels.push_back(false);
  }
  return s;
}

// Random two-class set; a small `levels` forces heavy ties.
cxr::ScoredSet random_set(std::mt19937_64& gen, std::size_t n, int levels) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> q(0, levels - 1);
  cxr::ScoredSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = i == 0 ? true : i == 1 ? false : u(gen) < 0.3;
    double v = levels > 0 ? q(gen) / static_cast<double>(levels) : u(gen);
    if (y) v = std::min(1.0, v + 0.1 * u(gen) * (levels > 0 ? 0 : 1));
    s.scores.push_back(v);
    s.labels.push_back(y);
  }
  return s;
}

double auc_of(const cxr::ScoredSet& s) {
  const auto curve = cxr::roc_curve(s);
  return cxr::auc(curve);
}

}  // namespace

// ---------------------------------------------------------------------------
// ROC and AUC

TEST(Roc, PerfectSeparation) {
  const auto s = make({0.9, 0.8}, {0.2, 0.1});
  EXPECT_EQ(auc_of(s), 1.0);
  const auto flipped = make({0.2, 0.1}, {0.9, 0.8});
  EXPECT_EQ(auc_of(flipped), 0.0);
}

TEST(Roc, AllEqualScoresGiveChanceDiagonal) {
  const auto curve = cxr::roc_curve(make({0.5, 0.5, 0.5}, {0.5, 0.5}));
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve.front().fpr, 0.0);
  EXPECT_EQ(curve.front().tpr, 0.0);
  EXPECT_EQ(curve.back().fpr, 1.0);
  EXPECT_EQ(curve.back().tpr, 1.0);
  EXPECT_EQ(cxr::auc(curve), 0.5);
}

TEST(Roc, FourPointExampleEnumeratesThresholds) {
  const auto curve = cxr::roc_curve(make({0.35, 0.8}, {0.1, 0.4}));
  const std::vector<cxr::RocPoint> expect{
      {1.8, 0.0, 0.0}, {0.8, 0.0, 0.5}, {0.4, 0.5, 0.5}, {0.35, 0.5, 1.0}, {0.1, 1.0, 1.0}};
  EXPECT_EQ(curve, expect);
  EXPECT_DOUBLE_EQ(cxr::auc(curve), 0.75);
}

TEST(Roc, CurveIsMonotoneAndAnchored) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_set(gen, 2 + trial * 3, trial % 2 ? 5 : 0);
    const auto curve = cxr::roc_curve(s);
    EXPECT_EQ(curve.front().fpr, 0.0);
    EXPECT_EQ(curve.front().tpr, 0.0);
    EXPECT_EQ(curve.back().fpr, 1.0);
    EXPECT_EQ(curve.back().tpr, 1.0);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      EXPECT_LT(curve[i].threshold, curve[i - 1].threshold);
      EXPECT_GE(curve[i].fpr, curve[i - 1].fpr);
      EXPECT_GE(curve[i].tpr, curve[i - 1].tpr);
      EXPECT_FALSE(curve[i].fpr == curve[i - 1].fpr && curve[i].tpr == curve[i - 1].tpr);
    }
    const double a = cxr::auc(curve);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Roc, MatchesPairwiseProbabilityOnRandomSets) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_set(gen, 2 + static_cast<std::size_t>(trial) * 2, trial % 3 == 0 ? 4 : 0);
    EXPECT_NEAR(auc_of(s), oracle::pairwise_auc(s.scores, s.labels), 1e-9);
  }
}

TEST(Roc, InvariantToMonotoneTransformAndLabelSwap) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_set(gen, 60, trial % 2 ? 6 : 0);
    auto squared = s;
    for (double& v : squared.scores) v = v * v;
    EXPECT_NEAR(auc_of(squared), auc_of(s), 1e-12);
    auto swapped = s;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      swapped.scores[i] = 1.0 - s.scores[i];
      swapped.labels[i] = !s.labels[i];
    }
    EXPECT_NEAR(auc_of(swapped), auc_of(s), 1e-12);
  }
}

TEST(Roc, InputErrors) {
  EXPECT_THROW(cxr::roc_curve(make({0.1, 0.9}, {})), cxr::DataError);
  EXPECT_THROW(cxr::roc_curve(make({}, {0.1})), cxr::DataError);
  EXPECT_THROW(cxr::roc_curve(make({1.5}, {0.1})), cxr::DataError);
  EXPECT_THROW(cxr::roc_curve(make({std::nan("")}, {0.1})), cxr::DataError);
  cxr::ScoredSet ragged{{0.1, 0.2}, {true}};
  EXPECT_THROW(ragged.validate(), cxr::DataError);
  EXPECT_THROW(cxr::select_threshold(make({0.3}, {})), cxr::DataError);
}

// ---------------------------------------------------------------------------
// Confusion and F1

TEST(Confusion, ThresholdZeroPredictsAllPositiveAndCountsAreConserved) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_set(gen, 40, 0);
    const auto all = cxr::confusion(s, 0.0);
    EXPECT_EQ(all.tp, s.positives());
    EXPECT_EQ(all.fp, s.negatives());
    const double t = std::uniform_real_distribution<double>(0, 1)(gen);
    const auto c = cxr::confusion(s, t);
    EXPECT_EQ(c.tp + c.fn, s.positives());
    EXPECT_EQ(c.fp + c.tn, s.negatives());
  }
}

TEST(F1, CountFormAndZeroConvention) {
  EXPECT_DOUBLE_EQ(cxr::f1_positive({2, 1, 0, 1}), 2.0 * 2 / (4 + 1 + 1));
  EXPECT_DOUBLE_EQ(cxr::f1_negative({2, 1, 3, 1}), 2.0 * 3 / (6 + 1 + 1));
  EXPECT_EQ(cxr::f1_positive({0, 0, 5, 0}), 0.0);
  EXPECT_DOUBLE_EQ(cxr::f1_macro({1, 0, 1, 0}), 1.0);
}

// ---------------------------------------------------------------------------
// Threshold selection

TEST(Threshold, ExampleMatchesExhaustiveSearch) {
  const auto s = make({0.9, 0.6}, {0.7, 0.2});
  EXPECT_EQ(cxr::threshold_candidates(s), oracle::candidates(s.scores));
  const auto choice = cxr::select_threshold(s);
  const auto sweep = oracle::exhaustive_threshold(s.scores, s.labels);
  EXPECT_EQ(choice.threshold, sweep.threshold);
  EXPECT_EQ(choice.objective, sweep.f1_macro);
  // Candidates 0.1, 0.4, 0.65, 0.8, 0.95: 0.4 and 0.8 both reach 11/15.
  EXPECT_DOUBLE_EQ(choice.threshold, 0.4);
  EXPECT_DOUBLE_EQ(choice.objective, 11.0 / 15.0);
}

TEST(Threshold, SentinelsBracketTheScores) {
  const auto c = cxr::threshold_candidates(make({1.0, 0.5}, {0.5, 0.2}));
  EXPECT_EQ(c.front(), 0.1);
  EXPECT_GT(c.back(), 1.0);
  EXPECT_EQ(c.size(), 4u);
  const auto perfect = cxr::select_threshold(make({0.9, 0.8}, {0.2, 0.1}));
  EXPECT_DOUBLE_EQ(perfect.threshold, 0.5);
  EXPECT_EQ(perfect.objective, 1.0);
}

TEST(Threshold, MatchesExhaustiveSearchOnRandomSets) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_set(gen, 2 + static_cast<std::size_t>(trial), trial % 2 ? 7 : 0);
    const auto choice = cxr::select_threshold(s);
    const auto sweep = oracle::exhaustive_threshold(s.scores, s.labels);
    EXPECT_EQ(choice.threshold, sweep.threshold) << trial;
    EXPECT_EQ(choice.objective, sweep.f1_macro) << trial;
    const auto pos = cxr::select_threshold(s, cxr::ThresholdObjective::positive_f1);
    for (double t : oracle::candidates(s.scores)) EXPECT_LE(cxr::f1_positive(cxr::confusion(s, t)), pos.objective);
  }
}

// ---------------------------------------------------------------------------
// Reports

TEST(Report, EvaluateFillsEveryField) {
  const auto s = make({0.9, 0.6}, {0.7, 0.2});
  const auto r = cxr::evaluate(s, 0.65);
  EXPECT_DOUBLE_EQ(r.auc, 0.75);
  EXPECT_EQ(r.counts, (cxr::Confusion{1, 1, 1, 1}));
  EXPECT_EQ(r.n_pos, 2u);
  EXPECT_EQ(r.n_neg, 2u);
  EXPECT_DOUBLE_EQ(r.f1_macro, 0.5);
  EXPECT_THROW(cxr::evaluate(s, -0.1), cxr::ConfigError);
  EXPECT_THROW(cxr::evaluate(s, std::nan("")), cxr::ConfigError);
}

TEST(Report, JsonHasAllKeys) {
  auto r = cxr::evaluate(make({0.9, 0.6}, {0.7, 0.2}), 0.4);
  r.metadata = {{"pathology", "Lung Lesion"}};
  std::ostringstream out;
  cxr::write_report_json(out, r);
  const auto j = nlohmann::json::parse(out.str());
  for (const char* key : {"auc", "threshold", "f1_pos", "f1_neg", "f1_macro", "tp", "fp", "tn", "fn", "n_pos", "n_neg"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["metadata"]["pathology"], "Lung Lesion");
  EXPECT_EQ(j["n_pos"], 2);
}

TEST(Report, RocCsvAndSvg) {
  const auto curve = cxr::roc_curve(make({0.35, 0.8}, {0.1, 0.4}));
  std::ostringstream csv;
  cxr::write_roc_csv(csv, curve, {"seed=1"});
  EXPECT_EQ(csv.str().substr(0, 30), "# seed=1\nthreshold,fpr,tpr\n1.8");
  std::ostringstream svg;
  cxr::write_roc_svg(svg, curve, 0.75, "Lung Lesion");
  EXPECT_NE(svg.str().find("<svg"), std::string::npos);
  EXPECT_NE(svg.str().find("0.75"), std::string::npos);
  EXPECT_NE(svg.str().find("polyline"), std::string::npos);
}

TEST(Report, ReferenceAucsAreRecordedOnly) {
  EXPECT_EQ(cxr::reference_auc("Lung Lesion"), 0.73);
  EXPECT_EQ(cxr::reference_auc("Cardiomegaly"), 0.92);
  EXPECT_TRUE(std::isnan(cxr::reference_auc("Edema")));
}

TEST(Score, NetworkScoresAreProbabilities) {
  cxr::DenseNetConfig c = cxr::preset_config("tiny");
  c.input_size = 16;
  const cxr::Network net(c, 3);
  cxr::ImageSet set;
  set.images = cxr::Tensor<float>({5, 1, 16, 16});
  std::mt19937 gen(1);
  std::normal_distribution<float> d;
  for (float& v : set.images.values()) v = d(gen);
  set.targets = {0, 1, 1, 0, 1};
  const auto scored = cxr::score(net, set, 2);
  ASSERT_EQ(scored.scores.size(), 5u);
  EXPECT_EQ(scored.labels, (std::vector<bool>{true, false, false, true, false}));
  const auto whole = cxr::score(net, set, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_GE(scored.scores[i], 0.0);
    EXPECT_LE(scored.scores[i], 1.0);
    EXPECT_NEAR(scored.scores[i], whole.scores[i], 1e-6);
  }
}
