#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>
#include <iterator>
#include <random>
#include <sstream>

#include "histocam/errors.hpp"
#include "histocam/metrics.hpp"
#include "support/oracles.hpp"

namespace {

namespace m = histocam::metrics;

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Random instance with both classes present; coarse scores force many ties.
Instance random_instance(std::mt19937_64& rng, std::size_t n, bool coarse) {
  Instance in;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  do {
    in.scores.clear();
    in.labels.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = u(rng);
      in.scores.push_back(coarse ? std::round(s * 10) / 10 : s);
      in.labels.push_back(static_cast<int>(rng() % 2));
    }
  } while (std::count(in.labels.begin(), in.labels.end(), 1) == 0 ||
           std::count(in.labels.begin(), in.labels.end(), 0) == 0);
  return in;
}

// Pairwise Mann-Whitney by enumeration, the definition itself.
double pairwise_auroc(const Instance& in) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < in.scores.size(); ++i) {
    if (in.labels[i] != 1) continue;
    for (std::size_t j = 0; j < in.scores.size(); ++j) {
      if (in.labels[j] != 0) continue;
      pairs += 1;
      wins += in.scores[i] > in.scores[j] ? 1.0 : in.scores[i] == in.scores[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

TEST(Confusion, SpecExamples) {
  const std::vector<double> s{0.9, 0.1};
  const std::vector<int> y{1, 0};
  EXPECT_EQ(m::confusion(s, y), (m::ConfusionCounts{1, 1, 0, 0}));
  const std::vector<double> boundary{0.5};
  const std::vector<int> neg{0};
  EXPECT_EQ(m::confusion(boundary, neg).false_positive, 1u);
}

TEST(Confusion, Errors) {
  const std::vector<double> none;
  const std::vector<int> no_labels;
  EXPECT_THROW(m::confusion(none, no_labels), histocam::DataError);
  const std::vector<double> s{0.3};
  const std::vector<int> bad{2};
  EXPECT_THROW(m::confusion(s, bad), histocam::DataError);
  const std::vector<int> two{0, 1};
  EXPECT_THROW(m::confusion(s, two), histocam::DataError);
}

TEST(ConfusionOracle, MatchesBruteForceRecount) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto in = random_instance(rng, 2 + rng() % 60, trial % 2 == 0);
    const double threshold = trial % 3 == 0 ? 0.5 : std::uniform_real_distribution<double>(0, 1)(rng);
    const auto c = m::confusion(in.scores, in.labels, threshold);
    const auto b = histocam::testing::brute_confusion(in.scores, in.labels, threshold);
    EXPECT_EQ(c.true_positive, b.tp);
    EXPECT_EQ(c.true_negative, b.tn);
    EXPECT_EQ(c.false_positive, b.fp);
    EXPECT_EQ(c.false_negative, b.fn);
    EXPECT_EQ(c.total(), in.scores.size());
  }
}

TEST(Ratios, HandComputedValues) {
  const m::ConfusionCounts perfect{1, 1, 0, 0};
  EXPECT_EQ(m::precision(perfect), 1.0);
  EXPECT_EQ(m::recall(perfect), 1.0);
  EXPECT_EQ(m::f1(perfect), 1.0);
  EXPECT_EQ(m::accuracy(perfect), 1.0);

  const m::ConfusionCounts c{8, 8, 2, 2};
  EXPECT_DOUBLE_EQ(m::precision(c), 0.8);
  EXPECT_DOUBLE_EQ(m::recall(c), 0.8);
  EXPECT_DOUBLE_EQ(m::f1(c), 0.8);
  EXPECT_DOUBLE_EQ(m::accuracy(c), 0.8);
}

TEST(Ratios, ZeroDenominatorIsZeroWithWarning) {
  const m::ConfusionCounts no_predicted_positive{0, 5, 0, 3};
  bool warn = false;
  EXPECT_EQ(m::precision(no_predicted_positive, &warn), 0.0);
  EXPECT_TRUE(warn);
  warn = false;
  EXPECT_EQ(m::recall(no_predicted_positive, &warn), 0.0);
  EXPECT_FALSE(warn);
  EXPECT_EQ(m::f1(no_predicted_positive, &warn), 0.0);
  EXPECT_TRUE(warn);

  const std::vector<double> s{0.1, 0.2, 0.3};
  const std::vector<int> y{1, 0, 1};
  const auto r = m::evaluate(s, y);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_FALSE(std::isnan(r.f1));
}

TEST(RatiosProperty, RangesAndIdentities) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const auto in = random_instance(rng, 2 + rng() % 50, false);
    for (auto avg : {m::Averaging::positive_class, m::Averaging::macro}) {
      const auto r = m::evaluate(in.scores, in.labels, avg);
      for (double v : {r.precision, r.recall, r.f1, r.accuracy, r.auroc}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_EQ(r.accuracy, static_cast<double>(r.counts.true_positive + r.counts.true_negative) /
                                static_cast<double>(in.scores.size()));
      if (r.precision + r.recall > 0) {
        EXPECT_NEAR(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall), 1e-12);
      }
    }
  }
}

TEST(Auroc, SpecExamples) {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.1};
  const std::vector<int> y{1, 0, 1, 0};
  EXPECT_EQ(m::auroc(s, y), 0.75);
  const std::vector<double> sep{0.9, 0.8, 0.2, 0.1};
  const std::vector<int> ysep{1, 1, 0, 0};
  EXPECT_EQ(m::auroc(sep, ysep), 1.0);
  const std::vector<double> flat(6, 0.4);
  const std::vector<int> yflat{1, 0, 1, 0, 0, 1};
  EXPECT_EQ(m::auroc(flat, yflat), 0.5);
  const std::vector<int> single{1, 1, 1, 1};
  EXPECT_THROW(m::auroc(s, single), histocam::DataError);
}

TEST(AurocOracle, MatchesTrapezoidAndPairwise) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng, 2 + rng() % 200, trial % 2 == 1);
    const double a = m::auroc(in.scores, in.labels);
    EXPECT_NEAR(a, histocam::testing::trapezoid_auroc(in.scores, in.labels), 1e-9);
    EXPECT_NEAR(a, pairwise_auroc(in), 1e-12);
  }
}

TEST(AurocProperty, ComplementSumsToOne) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(rng, 2 + rng() % 80, false);
    std::vector<int> flipped(in.labels.size());
    for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = 1 - in.labels[i];
    EXPECT_NEAR(m::auroc(in.scores, in.labels) + m::auroc(in.scores, flipped), 1.0, 1e-12);
  }
}

TEST(AurocProperty, InvariantUnderMonotoneMaps) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(rng, 2 + rng() % 80, trial % 2 == 0);
    const double k = std::uniform_real_distribution<double>(0.5, 5)(rng);
    const double shift = std::uniform_real_distribution<double>(-3, 3)(rng);
    std::vector<double> mapped(in.scores.size());
    for (std::size_t i = 0; i < mapped.size(); ++i) mapped[i] = std::exp(k * in.scores[i]) + shift;
    EXPECT_EQ(m::auroc(mapped, in.labels), m::auroc(in.scores, in.labels));
  }
}

TEST(Format, TableRowsMatchPaperLayout) {
  EXPECT_EQ(m::format_metric(0.975), "0.975");
  EXPECT_EQ(m::format_metric(0.98), "0.98");
  EXPECT_EQ(m::format_metric(0.999), "0.999");
  EXPECT_EQ(m::format_metric(1.0), "1.0");
  EXPECT_EQ(m::format_metric(0.0), "0.0");
  const std::string row = m::table_row("VGG16", 0.975, 0.975, 0.98, 0.98, 0.999);
  std::istringstream is(row);
  std::vector<std::string> cells{std::istream_iterator<std::string>(is), {}};
  EXPECT_EQ(cells, (std::vector<std::string>{"VGG16", "0.975", "0.975", "0.98", "0.98", "0.999"}));
  std::istringstream hs(m::table_header());
  std::vector<std::string> head{std::istream_iterator<std::string>(hs), {}};
  EXPECT_EQ(head, (std::vector<std::string>{"Model", "Precision", "Recall", "F1-score", "Accuracy", "Auroc"}));
}

TEST(Format, JsonReport) {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.1};
  const std::vector<int> y{1, 0, 1, 0};
  auto r = m::evaluate(s, y);
  r.model = "TinyVGG";
  r.task = "colon";
  const auto j = nlohmann::json::parse(m::report_to_json(r));
  for (const char* key : {"model", "task", "precision", "recall", "f1", "accuracy", "auroc", "threshold", "n"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["model"], "TinyVGG");
  EXPECT_EQ(j["auroc"].get<double>(), 0.75);
  EXPECT_EQ(j["n"].get<int>(), 4);
  EXPECT_EQ(j["threshold"].get<double>(), 0.5);
  EXPECT_EQ(j["precision"].get<double>(), 2.0 / 3.0);
}

}  // namespace
