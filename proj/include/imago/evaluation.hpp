#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imago/trace.hpp"

namespace imago {

/// A true label and its estimate.
struct Prediction {
  double truth = 0.0;
  double estimate = 0.0;
};

struct McaeTrace {
  double final = 0.0;
  /// running[k-1] = mean absolute error of the first k predictions.
  std::vector<double> running;
};

/// Mean absolute error with its running series, summed in input order.
/// Throws ValidationError on empty input.
McaeTrace mcae(std::span<const Prediction> predictions);

/// Square count matrix: rows are true classes, columns estimated classes.
/// Class indices are 1-based.
class ConfusionMatrix {
public:
  explicit ConfusionMatrix(int classes = kConfusionBuckets);

  int classes() const noexcept { return classes_; }
  std::uint64_t at(int true_class, int estimated_class) const;
  void add(int true_class, int estimated_class, std::uint64_t count = 1);
  std::uint64_t total() const noexcept;
  std::uint64_t column_total(int estimated_class) const;
  std::uint64_t row_total(int true_class) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
  std::size_t index(int r, int c) const;

  int classes_;
  std::vector<std::uint64_t> counts_;
};

/// Decile confusion matrix: each pair lands at
/// [bucket_for_confusion(truth)][bucket_for_confusion(estimate)].
ConfusionMatrix confusion(std::span<const Prediction> predictions);

struct RegionDecomposition {
  std::uint64_t upper = 0;     // R5: estimate above truth
  std::uint64_t lower = 0;     // R6: estimate below truth
  std::uint64_t diagonal = 0;  // R7
};

RegionDecomposition regions(const ConfusionMatrix& cm);

/// R5/R6; +inf when R6 = 0 < R5, 1 when R5 = R6 = 0.
/// Throws ValidationError for an empty matrix.
double conservativeness(const ConfusionMatrix& cm);

/// R7 / total. Throws ValidationError for an empty matrix.
double total_accuracy(const ConfusionMatrix& cm);

/// One-vs-rest counts and metrics for a single class.
struct ClassMetrics {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  double error_rate = 0.0;
  /// Undefined when the class is never estimated (TP + FP = 0).
  std::optional<double> precision;
  /// 0 when the class never occurs (TP + FN = 0).
  double recall = 0.0;
  /// 2TP / (2TP + FP + FN); undefined when that denominator is 0.
  std::optional<double> f1;
};

/// Throws ValidationError for an empty matrix.
std::vector<ClassMetrics> per_class(const ConfusionMatrix& cm);

/// Complete evaluation of one approach.
struct EvalReport {
  std::string approach;
  std::uint64_t samples = 0;
  double mcae = 0.0;
  std::vector<double> running_mcae;
  ConfusionMatrix confusion;
  RegionDecomposition regions;
  std::vector<ClassMetrics> classes;
  double conservativeness = 1.0;
  double total_accuracy = 0.0;
};

EvalReport evaluate(std::string approach, std::span<const Prediction> predictions);

/// Number of classes in which an approach attains the best defined value,
/// per metric. Ties at the maximum all score.
struct MetricScore {
  std::string approach;
  int accuracy = 0;
  int precision = 0;
  int recall = 0;
  int f1 = 0;

  friend bool operator==(const MetricScore&, const MetricScore&) = default;
};

/// Requires at least two reports over the same number of classes.
std::vector<MetricScore> per_class_score(std::span<const EvalReport> reports);

}  // namespace imago
