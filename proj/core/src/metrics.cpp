#include "histocam/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "histocam/errors.hpp"

namespace histocam::metrics {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("metrics: " + std::to_string(scores.size()) + " scores for " + std::to_string(labels.size()) +
                    " labels");
  }
  if (scores.empty()) throw DataError("metrics: no examples to evaluate");
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("metrics: label " + std::to_string(y) + " is not in {0, 1}");
  }
}

double ratio(std::size_t num, std::size_t den, bool* warning) {
  if (den == 0) {
    if (warning) *warning = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r, bool* warning) {
  if (p + r == 0.0) {
    if (warning) *warning = true;
    return 0.0;
  }
  return 2.0 * p * r / (p + r);
}

}  // namespace

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      ++(predicted ? c.true_positive : c.false_negative);
    } else {
      ++(predicted ? c.false_positive : c.true_negative);
    }
  }
  return c;
}

double precision(const ConfusionCounts& c, bool* warning) {
  return ratio(c.true_positive, c.true_positive + c.false_positive, warning);
}

double recall(const ConfusionCounts& c, bool* warning) {
  return ratio(c.true_positive, c.true_positive + c.false_negative, warning);
}

double accuracy(const ConfusionCounts& c, bool* warning) {
  return ratio(c.true_positive + c.true_negative, c.total(), warning);
}

double f1(const ConfusionCounts& c, bool* warning) {
  bool flagged = false;
  const double p = precision(c, &flagged);
  const double r = recall(c, &flagged);
  const double value = harmonic(p, r, &flagged);
  if (flagged && warning) *warning = true;
  return value;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += static_cast<std::size_t>(y);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auroc is undefined when only one class is present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum of the positives, with tied groups sharing their mean
  // rank, keeps everything in integers until the final division.
  unsigned long long rank_sum_x2 = 0;
  for (std::size_t first = 0; first < n;) {
    std::size_t last = first;
    while (last + 1 < n && scores[order[last + 1]] == scores[order[first]]) ++last;
    const unsigned long long group_rank_x2 = first + last + 2;
    for (std::size_t k = first; k <= last; ++k) {
      if (labels[order[k]] == 1) rank_sum_x2 += group_rank_x2;
    }
    first = last + 1;
  }
  const unsigned long long u_x2 = rank_sum_x2 - static_cast<unsigned long long>(n_pos) * (n_pos + 1);
  return static_cast<double>(u_x2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels, Averaging averaging,
                       double threshold) {
  MetricsReport r;
  r.counts = confusion(scores, labels, threshold);
  r.threshold = threshold;
  r.n_examples = scores.size();
  r.averaging = averaging;

  bool warn_p = false, warn_r = false, warn_f = false;
  if (averaging == Averaging::positive_class) {
    r.precision = precision(r.counts, &warn_p);
    r.recall = recall(r.counts, &warn_r);
  } else {
    const auto& c = r.counts;
    const double neg_precision = ratio(c.true_negative, c.true_negative + c.false_negative, &warn_p);
    const double neg_recall = ratio(c.true_negative, c.true_negative + c.false_positive, &warn_r);
    r.precision = 0.5 * (precision(c, &warn_p) + neg_precision);
    r.recall = 0.5 * (recall(c, &warn_r) + neg_recall);
  }
  r.f1 = harmonic(r.precision, r.recall, &warn_f);
  r.accuracy = accuracy(r.counts);
  r.auroc = auroc(scores, labels);
  if (warn_p) r.warnings.emplace_back("precision has a zero denominator; reported as 0.0");
  if (warn_r) r.warnings.emplace_back("recall has a zero denominator; reported as 0.0");
  if (warn_f) r.warnings.emplace_back("f1 has a zero denominator; reported as 0.0");
  return r;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["model"] = report.model;
  j["task"] = report.task;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  j["accuracy"] = report.accuracy;
  j["auroc"] = report.auroc;
  j["threshold"] = report.threshold;
  j["n"] = report.n_examples;
  j["averaging"] = report.averaging == Averaging::macro ? "macro" : "positive_class";
  j["confusion"] = {{"tp", report.counts.true_positive},
                    {"tn", report.counts.true_negative},
                    {"fp", report.counts.false_positive},
                    {"fn", report.counts.false_negative}};
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

namespace {

constexpr int kModelWidth = 20;
constexpr int kColumnWidth = 11;

}  // namespace

std::string table_header() {
  std::ostringstream os;
  os << std::left << std::setw(kModelWidth) << "Model";
  for (const char* name : {"Precision", "Recall", "F1-score", "Accuracy"}) os << std::setw(kColumnWidth) << name;
  os << "Auroc";
  return os.str();
}

std::string table_row(const std::string& model, double precision, double recall, double f1, double accuracy,
                      double auroc) {
  std::ostringstream os;
  os << std::left << std::setw(kModelWidth) << model;
  for (double v : {precision, recall, f1, accuracy}) os << std::setw(kColumnWidth) << format_metric(v);
  os << format_metric(auroc);
  return os.str();
}

std::string report_table(const std::vector<MetricsReport>& reports) {
  std::string out = table_header() + "\n";
  for (const auto& r : reports) out += table_row(r.model, r.precision, r.recall, r.f1, r.accuracy, r.auroc) + "\n";
  return out;
}

}  // namespace histocam::metrics
