#include "imago/evaluation.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "imago/errors.hpp"

namespace imago {

McaeTrace mcae(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw ValidationError("mcae: no predictions");
  McaeTrace out;
  out.running.reserve(predictions.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    sum += std::fabs(predictions[k].truth - predictions[k].estimate);
    out.running.push_back(sum / static_cast<double>(k + 1));
  }
  out.final = out.running.back();
  return out;
}

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
  if (classes < 1) throw ValidationError("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0);
}

std::size_t ConfusionMatrix::index(int r, int c) const {
  if (r < 1 || r > classes_ || c < 1 || c > classes_) {
    throw ValidationError(fmt::format("confusion index ({},{}) outside 1..{}", r, c, classes_));
  }
  return static_cast<std::size_t>(r - 1) * static_cast<std::size_t>(classes_) +
         static_cast<std::size_t>(c - 1);
}

std::uint64_t ConfusionMatrix::at(int true_class, int estimated_class) const {
  return counts_[index(true_class, estimated_class)];
}

void ConfusionMatrix::add(int true_class, int estimated_class, std::uint64_t count) {
  counts_[index(true_class, estimated_class)] += count;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t n = 0;
  for (const auto v : counts_) n += v;
  return n;
}

std::uint64_t ConfusionMatrix::column_total(int estimated_class) const {
  std::uint64_t n = 0;
  for (int r = 1; r <= classes_; ++r) n += at(r, estimated_class);
  return n;
}

std::uint64_t ConfusionMatrix::row_total(int true_class) const {
  std::uint64_t n = 0;
  for (int c = 1; c <= classes_; ++c) n += at(true_class, c);
  return n;
}

ConfusionMatrix confusion(std::span<const Prediction> predictions) {
  ConfusionMatrix cm;
  for (const auto& p : predictions) {
    cm.add(bucket_for_confusion(MaliciousnessLevel(p.truth)),
           bucket_for_confusion(MaliciousnessLevel(p.estimate)));
  }
  return cm;
}

RegionDecomposition regions(const ConfusionMatrix& cm) {
  RegionDecomposition out;
  for (int r = 1; r <= cm.classes(); ++r) {
    for (int c = 1; c <= cm.classes(); ++c) {
      const auto v = cm.at(r, c);
      if (r < c) {
        out.upper += v;
      } else if (r > c) {
        out.lower += v;
      } else {
        out.diagonal += v;
      }
    }
  }
  return out;
}

double conservativeness(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ValidationError("conservativeness: empty confusion matrix");
  const auto reg = regions(cm);
  if (reg.lower == 0) return reg.upper == 0 ? 1.0 : std::numeric_limits<double>::infinity();
  return static_cast<double>(reg.upper) / static_cast<double>(reg.lower);
}

double total_accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw ValidationError("total accuracy: empty confusion matrix");
  return static_cast<double>(regions(cm).diagonal) / static_cast<double>(n);
}

std::vector<ClassMetrics> per_class(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw ValidationError("per-class metrics: empty confusion matrix");
  const double dn = static_cast<double>(n);
  std::vector<ClassMetrics> out;
  out.reserve(static_cast<std::size_t>(cm.classes()));
  for (int i = 1; i <= cm.classes(); ++i) {
    ClassMetrics m;
    m.tp = cm.at(i, i);
    m.fp = cm.column_total(i) - m.tp;
    m.fn = cm.row_total(i) - m.tp;
    m.tn = n - m.tp - m.fp - m.fn;
    m.accuracy = static_cast<double>(m.tp + m.tn) / dn;
    m.error_rate = static_cast<double>(m.fp + m.fn) / dn;
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    const auto f1_den = 2 * m.tp + m.fp + m.fn;
    if (f1_den > 0) m.f1 = static_cast<double>(2 * m.tp) / static_cast<double>(f1_den);
    out.push_back(m);
  }
  return out;
}

EvalReport evaluate(std::string approach, std::span<const Prediction> predictions) {
  auto trace = mcae(predictions);
  EvalReport r;
  r.approach = std::move(approach);
  r.samples = predictions.size();
  r.mcae = trace.final;
  r.running_mcae = std::move(trace.running);
  r.confusion = confusion(predictions);
  r.regions = regions(r.confusion);
  r.classes = per_class(r.confusion);
  r.conservativeness = conservativeness(r.confusion);
  r.total_accuracy = total_accuracy(r.confusion);
  return r;
}

std::vector<MetricScore> per_class_score(std::span<const EvalReport> reports) {
  if (reports.size() < 2) throw ValidationError("per-class score needs at least two approaches");
  const auto classes = reports.front().classes.size();
  for (const auto& r : reports) {
    if (r.classes.size() != classes) throw ValidationError("per-class score: class count mismatch");
  }

  std::vector<MetricScore> scores;
  for (const auto& r : reports) scores.push_back({r.approach});

  // Each metric is read as an optional so undefined values never win.
  auto award = [&](auto read, int MetricScore::*field) {
    for (std::size_t i = 0; i < classes; ++i) {
      std::optional<double> best;
      for (const auto& r : reports) {
        const std::optional<double> v = read(r.classes[i]);
        if (v && (!best || *v > *best)) best = v;
      }
      if (!best) continue;
      for (std::size_t a = 0; a < reports.size(); ++a) {
        const std::optional<double> v = read(reports[a].classes[i]);
        if (v && *v == *best) ++(scores[a].*field);
      }
    }
  };
  award([](const ClassMetrics& m) { return std::optional<double>(m.accuracy); }, &MetricScore::accuracy);
  award([](const ClassMetrics& m) { return m.precision; }, &MetricScore::precision);
  award([](const ClassMetrics& m) { return std::optional<double>(m.recall); }, &MetricScore::recall);
  award([](const ClassMetrics& m) { return m.f1; }, &MetricScore::f1);
  return scores;
}

}  // namespace imago
