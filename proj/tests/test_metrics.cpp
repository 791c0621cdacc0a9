#include <gtest/gtest.h>

#include <random>

#include "dnas3d/errors.hpp"
#include "dnas3d/metrics.hpp"

using namespace dnas3d;

namespace {

// Per-sample recount straight from the definitions.
struct BruteForce {
  long tp = 0, fp = 0, tn = 0, fn = 0, correct = 0;
};

BruteForce recount(const std::vector<int>& pred, const std::vector<int>& label, int pos) {
  BruteForce b;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i] == pos ? 1 : 0, t = label[i] == pos ? 1 : 0;
    b.tp += p & t;
    b.fp += p & (1 - t);
    b.fn += (1 - p) & t;
    b.tn += (1 - p) & (1 - t);
    b.correct += pred[i] == label[i];
  }
  return b;
}

MetricsReport from_counts(long tp, long fp, long tn, long fn) {
  ConfusionCounts c;
  c.tp = tp;
  c.fp = fp;
  c.tn = tn;
  c.fn = fn;
  return compute_metrics(c, tp + tn, c.total());
}

}  // namespace

TEST(Confusion, PerfectBalancedBinary) {
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) y[std::size_t(i)] = i % 2;
  const auto c = confusion(y, y, 1);
  EXPECT_EQ(c.tp, 10);
  EXPECT_EQ(c.tn, 10);
  EXPECT_EQ(c.fp, 0);
  EXPECT_EQ(c.fn, 0);
}

TEST(Confusion, TwoNegativeClassesCountAsTrueNegative) {
  // Class 1 positive; true 2 predicted 0 is a negative predicted negative.
  const std::vector<int> pred{0}, label{2};
  EXPECT_EQ(confusion(pred, label, 1).tn, 1);
}

TEST(Confusion, LengthMismatchIsAnError) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(confusion(a, b, 1), ArgumentError);
}

TEST(Metrics, WorkedExample) {
  const auto r = from_counts(9, 1, 7, 3);
  EXPECT_NEAR(r.precision, 0.900, 1e-12);
  EXPECT_NEAR(r.sensitivity, 0.750, 1e-12);
  EXPECT_NEAR(r.f1, 0.8182, 1e-4);
  EXPECT_NEAR(r.binary_accuracy, 0.8, 1e-12);
}

TEST(Metrics, ZeroDenominatorsAreFlagged) {
  const auto r = from_counts(0, 0, 6, 4);
  EXPECT_TRUE(r.precision_undefined);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.sensitivity, 0.0);
  EXPECT_FALSE(r.sensitivity_undefined);
  EXPECT_TRUE(r.f1_undefined);
  EXPECT_THROW(compute_metrics(ConfusionCounts{}, 0, 0), ArgumentError);
}

TEST(Metrics, SymmetricCounts) { EXPECT_DOUBLE_EQ(from_counts(5, 5, 5, 5).binary_accuracy, 0.5); }

TEST(Metrics, AgreesWithBruteForceRecount) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 1000; ++t) {
    const int classes = 2 + int(rng() % 4);
    const std::size_t n = 1 + rng() % 80;
    const int pos = int(rng() % std::uint64_t(classes));
    std::vector<int> pred(n), label(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = int(rng() % std::uint64_t(classes));
      label[i] = int(rng() % std::uint64_t(classes));
    }
    const auto r = evaluate_predictions(pred, label, classes, pos, 0.0);
    const auto b = recount(pred, label, pos);
    ASSERT_EQ(r.counts.tp, b.tp);
    ASSERT_EQ(r.counts.fp, b.fp);
    ASSERT_EQ(r.counts.tn, b.tn);
    ASSERT_EQ(r.counts.fn, b.fn);
    ASSERT_EQ(r.counts.total(), long(n));
    ASSERT_DOUBLE_EQ(r.accuracy, double(b.correct) / double(n));
    if (b.tp + b.fp > 0) ASSERT_DOUBLE_EQ(r.precision, double(b.tp) / double(b.tp + b.fp));
    if (b.tp + b.fn > 0) ASSERT_DOUBLE_EQ(r.sensitivity, double(b.tp) / double(b.tp + b.fn));
    if (!r.precision_undefined && !r.sensitivity_undefined && !r.f1_undefined)
      ASSERT_NEAR(r.f1, 2 * r.precision * r.sensitivity / (r.precision + r.sensitivity), 1e-15);
    long table_total = 0;
    for (int a = 0; a < classes; ++a)
      for (int p = 0; p < classes; ++p) table_total += r.per_class_counts[std::size_t(a)][std::size_t(p)];
    ASSERT_EQ(table_total, long(n));
  }
}

TEST(Metrics, ReportFormats) {
  auto r = from_counts(9, 1, 7, 3);
  r.model_size_mb = 1.5;
  const auto text = format_report_text(r);
  EXPECT_NE(text.find("precision_pct: 90.00\n"), std::string::npos);
  EXPECT_NE(text.find("sensitivity_pct: 75.00\n"), std::string::npos);
  EXPECT_NE(text.find("f1_pct: 81.82\n"), std::string::npos);
  EXPECT_NE(text.find("model_size_mb: 1.5000\n"), std::string::npos);
  const auto header = report_csv_header(), row = format_report_csv(r);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
}
