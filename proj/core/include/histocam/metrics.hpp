#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace histocam::metrics {

struct ConfusionCounts {
  std::size_t true_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  std::size_t total() const { return true_positive + true_negative + false_positive + false_negative; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline constexpr double kDefaultThreshold = 0.5;

/// Predicts positive iff score >= threshold.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold = kDefaultThreshold);

// Zero denominators yield 0.0; `warning`, when given, is set in that case.
double precision(const ConfusionCounts& c, bool* warning = nullptr);
double recall(const ConfusionCounts& c, bool* warning = nullptr);
double accuracy(const ConfusionCounts& c, bool* warning = nullptr);
double f1(const ConfusionCounts& c, bool* warning = nullptr);

/// Mann-Whitney U / (n_pos * n_neg) with ties counted one half, i.e. the
/// probability that a random positive outscores a random negative.
/// Throws DataError when only one class is present.
double auroc(std::span<const double> scores, std::span<const int> labels);

enum class Averaging { positive_class, macro };

struct MetricsReport {
  std::string model;
  std::string task;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double auroc = 0.0;
  double threshold = kDefaultThreshold;
  std::size_t n_examples = 0;
  Averaging averaging = Averaging::positive_class;
  ConfusionCounts counts;
  std::vector<std::string> warnings;
};

MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels,
                       Averaging averaging = Averaging::positive_class, double threshold = kDefaultThreshold);

/// {model, task, precision, recall, f1, accuracy, auroc, threshold, n}
std::string report_to_json(const MetricsReport& report);

/// Three decimals with trailing zeros trimmed, at least one decimal: 0.975,
/// 0.98, 1.0.
std::string format_metric(double value);

std::string table_header();
std::string table_row(const std::string& model, double precision, double recall, double f1, double accuracy,
                      double auroc);
/// Header plus one row per report, columns Model, Precision, Recall,
/// F1-score, Accuracy, Auroc.
std::string report_table(const std::vector<MetricsReport>& reports);

}  // namespace histocam::metrics
