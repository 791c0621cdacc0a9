#include "dnas3d/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "dnas3d/errors.hpp"

namespace dnas3d {

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels,
                          int positive_class) {
  if (predictions.size() != labels.size())
    throw ArgumentError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  ConfusionCounts c;
  c.positive_class = positive_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred_pos = predictions[i] == positive_class;
    const bool true_pos = labels[i] == positive_class;
    if (pred_pos && true_pos) ++c.tp;
    else if (pred_pos) ++c.fp;
    else if (true_pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricsReport compute_metrics(const ConfusionCounts& counts, long correct_multiclass, long total) {
  if (total <= 0) throw ArgumentError("compute_metrics: total must be positive");
  MetricsReport r;
  r.counts = counts;
  r.accuracy = double(correct_multiclass) / double(total);
  r.binary_accuracy = double(counts.tp + counts.tn) / double(total);
  if (counts.tp + counts.fp > 0) r.precision = double(counts.tp) / double(counts.tp + counts.fp);
  else r.precision_undefined = true;
  if (counts.tp + counts.fn > 0) r.sensitivity = double(counts.tp) / double(counts.tp + counts.fn);
  else r.sensitivity_undefined = true;
  if (r.precision + r.sensitivity > 0.0)
    r.f1 = 2.0 * r.precision * r.sensitivity / (r.precision + r.sensitivity);
  else r.f1_undefined = true;
  return r;
}

MetricsReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                   int num_classes, int positive_class, double size_mb) {
  const auto counts = confusion(predictions, labels, positive_class);
  long correct = 0;
  std::vector<std::vector<long>> table(std::size_t(num_classes), std::vector<long>(std::size_t(num_classes), 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) ++correct;
    if (labels[i] >= 0 && labels[i] < num_classes && predictions[i] >= 0 && predictions[i] < num_classes)
      ++table[std::size_t(labels[i])][std::size_t(predictions[i])];
  }
  auto r = compute_metrics(counts, correct, long(labels.size()));
  r.per_class_counts = std::move(table);
  r.model_size_mb = size_mb;
  return r;
}

namespace {
std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}
std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}
}  // namespace

std::string format_report_text(const MetricsReport& r) {
  std::ostringstream os;
  os << "accuracy_pct: " << pct(r.accuracy) << '\n'
     << "binary_accuracy_pct: " << pct(r.binary_accuracy) << '\n'
     << "precision_pct: " << pct(r.precision) << (r.precision_undefined ? " (undefined)" : "") << '\n'
     << "sensitivity_pct: " << pct(r.sensitivity) << (r.sensitivity_undefined ? " (undefined)" : "") << '\n'
     << "f1_pct: " << pct(r.f1) << (r.f1_undefined ? " (undefined)" : "") << '\n'
     << "model_size_mb: " << fixed(r.model_size_mb, 4) << '\n'
     << "positive_class: " << r.counts.positive_class << '\n'
     << "tp: " << r.counts.tp << '\n'
     << "fp: " << r.counts.fp << '\n'
     << "tn: " << r.counts.tn << '\n'
     << "fn: " << r.counts.fn << '\n';
  for (std::size_t t = 0; t < r.per_class_counts.size(); ++t) {
    os << "confusion_row_" << t << ':';
    for (long v : r.per_class_counts[t]) os << ' ' << v;
    os << '\n';
  }
  return os.str();
}

std::string report_csv_header() {
  return "accuracy_pct,binary_accuracy_pct,precision_pct,sensitivity_pct,f1_pct,model_size_mb,tp,fp,tn,fn,"
         "precision_undefined,sensitivity_undefined";
}

std::string format_report_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << pct(r.accuracy) << ',' << pct(r.binary_accuracy) << ',' << pct(r.precision) << ','
     << pct(r.sensitivity) << ',' << pct(r.f1) << ',' << fixed(r.model_size_mb, 4) << ',' << r.counts.tp
     << ',' << r.counts.fp << ',' << r.counts.tn << ',' << r.counts.fn << ','
     << int(r.precision_undefined) << ',' << int(r.sensitivity_undefined);
  return os.str();
}

}  // namespace dnas3d
