#pragma once

#include <span>
#include <string>
#include <vector>

namespace dnas3d {

/// Binary counts with every class other than `positive_class` treated as negative.
struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  int positive_class = 1;

  long total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels,
                          int positive_class);

struct MetricsReport {
  double accuracy = 0.0;         // multi-class correct / total
  double binary_accuracy = 0.0;  // (TP + TN) / total
  double precision = 0.0;
  double sensitivity = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool sensitivity_undefined = false;
  bool f1_undefined = false;
  double model_size_mb = 0.0;
  ConfusionCounts counts;
  // per_class[true][predicted]
  std::vector<std::vector<long>> per_class_counts;
};

MetricsReport compute_metrics(const ConfusionCounts& counts, long correct_multiclass, long total);

// Full evaluation from raw predictions.
MetricsReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                   int num_classes, int positive_class, double model_size_mb);

// "key: value" lines; percentages with two decimals.
std::string format_report_text(const MetricsReport& r);
std::string report_csv_header();
std::string format_report_csv(const MetricsReport& r);

}  // namespace dnas3d
