#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace imago {

/// Continuous maliciousness label in [0, 1]; 1 is most malicious.
class MaliciousnessLevel {
public:
  /// Throws ValidationError("label out of range") outside [0, 1] or for NaN.
  explicit MaliciousnessLevel(double value);

  double value() const noexcept { return value_; }

  friend bool operator==(MaliciousnessLevel, MaliciousnessLevel) = default;
  friend auto operator<=>(MaliciousnessLevel, MaliciousnessLevel) = default;

private:
  double value_;
};

/// One feature call: feature index and call time, both 1-based.
struct FeatureEvent {
  int feature = 1;
  int time = 1;

  friend auto operator<=>(const FeatureEvent&, const FeatureEvent&) = default;
};

/// Image geometry: n_features rows by horizon columns.
struct ImageShape {
  int features = 0;
  int horizon = 0;

  std::size_t cells() const noexcept {
    return static_cast<std::size_t>(features) * static_cast<std::size_t>(horizon);
  }
  bool contains(const FeatureEvent& e) const noexcept {
    return e.feature >= 1 && e.feature <= features && e.time >= 1 && e.time <= horizon;
  }
  /// Throws ValidationError unless both extents are positive.
  void validate() const;

  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// A behavioral trace: a label plus the set of (feature, time) events.
/// Events are stored sorted and deduplicated.
class Trace {
public:
  Trace(std::string id, MaliciousnessLevel label, std::vector<FeatureEvent> events);

  const std::string& id() const noexcept { return id_; }
  MaliciousnessLevel label() const noexcept { return label_; }
  double xi() const noexcept { return label_.value(); }
  std::span<const FeatureEvent> events() const noexcept { return events_; }

  friend bool operator==(const Trace&, const Trace&) = default;

private:
  std::string id_;
  MaliciousnessLevel label_;
  std::vector<FeatureEvent> events_;
};

/// Target cluster floor(levels * xi) + 1, with xi == 1 clamped to `levels`.
int assign_cluster(MaliciousnessLevel label, int levels);

inline constexpr int kConfusionBuckets = 10;

/// Decile bucket i with (i-1)/10 <= xi < i/10; xi == 1 lands in bucket 10.
int bucket_for_confusion(MaliciousnessLevel level);

struct LabelStats {
  std::vector<std::size_t> histogram;
  /// Cumulative histogram normalized by the label count; the last entry is 1.
  std::vector<double> cdf;
  std::vector<double> sorted_labels;

  std::size_t total() const noexcept { return sorted_labels.size(); }
  /// Fraction of labels strictly greater than `threshold`.
  double fraction_above(double threshold) const;
  /// Empirical CDF, fraction of labels <= x.
  double cdf_at(double x) const;
};

/// Histogram over `bins` equal-width bins of [0, 1] plus the empirical CDF.
/// Throws ValidationError on an empty dataset or bins < 1.
LabelStats label_stats(std::span<const Trace> traces, int bins);

}  // namespace imago
