#include "imago/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "imago/errors.hpp"

namespace imago {

MaliciousnessLevel::MaliciousnessLevel(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ValidationError(fmt::format("label out of range: {}", value));
  }
}

void ImageShape::validate() const {
  if (features <= 0 || horizon <= 0) {
    throw ValidationError(
        fmt::format("image shape must be positive, got {}x{}", features, horizon));
  }
}

Trace::Trace(std::string id, MaliciousnessLevel label, std::vector<FeatureEvent> events)
    : id_(std::move(id)), label_(label), events_(std::move(events)) {
  std::sort(events_.begin(), events_.end());
  events_.erase(std::unique(events_.begin(), events_.end()), events_.end());
}

int assign_cluster(MaliciousnessLevel label, int levels) {
  if (levels < 1) throw ValidationError(fmt::format("levels must be >= 1, got {}", levels));
  const auto tc = static_cast<int>(std::floor(levels * label.value())) + 1;
  return std::min(tc, levels);
}

int bucket_for_confusion(MaliciousnessLevel level) {
  return assign_cluster(level, kConfusionBuckets);
}

double LabelStats::fraction_above(double threshold) const {
  const auto it = std::upper_bound(sorted_labels.begin(), sorted_labels.end(), threshold);
  return static_cast<double>(sorted_labels.end() - it) / static_cast<double>(total());
}

double LabelStats::cdf_at(double x) const {
  const auto it = std::upper_bound(sorted_labels.begin(), sorted_labels.end(), x);
  return static_cast<double>(it - sorted_labels.begin()) / static_cast<double>(total());
}

LabelStats label_stats(std::span<const Trace> traces, int bins) {
  if (traces.empty()) throw ValidationError("label_stats: empty dataset");
  if (bins < 1) throw ValidationError(fmt::format("bins must be >= 1, got {}", bins));

  LabelStats stats;
  stats.histogram.assign(static_cast<std::size_t>(bins), 0);
  stats.sorted_labels.reserve(traces.size());
  for (const auto& t : traces) {
    ++stats.histogram[static_cast<std::size_t>(assign_cluster(t.label(), bins) - 1)];
    stats.sorted_labels.push_back(t.xi());
  }
  std::sort(stats.sorted_labels.begin(), stats.sorted_labels.end());

  stats.cdf.reserve(stats.histogram.size());
  std::size_t running = 0;
  for (const auto count : stats.histogram) {
    running += count;
    stats.cdf.push_back(static_cast<double>(running) / static_cast<double>(traces.size()));
  }
  return stats;
}

}  // namespace imago
