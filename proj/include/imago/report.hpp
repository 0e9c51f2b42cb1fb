#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imago/dataset.hpp"
#include "imago/evaluation.hpp"

namespace imago {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kModelFormatVersion = 1;

enum class ReportFormat { json, markdown };

ReportFormat parse_report_format(std::string_view name);

/// Deterministic report text. JSON carries every field (+inf as "inf",
/// undefined metrics as null); markdown shows the per-class table with one
/// column block per approach, "-" for undefined values, and a summary
/// table. Throws ValidationError for an empty report list.
std::string emit_report(std::span<const EvalReport> reports, ReportFormat format);

/// Reads the JSON produced by emit_report. Derived metrics are recomputed
/// from the stored confusion matrix.
std::vector<EvalReport> parse_report_json(std::string_view text);

/// Label band of decile class i, e.g. "0.3 <= xi' < 0.4".
std::string band_label(int cls, int classes = kConfusionBuckets);

struct PredictionRow {
  std::string id;
  double xi_hat = 0.0;
};

/// CSV with mandatory header "id,xi_hat". Errors name the line number.
std::vector<PredictionRow> read_predictions_csv(std::istream& in, const std::string& source_name);
std::vector<PredictionRow> load_predictions_csv(const std::filesystem::path& path);
void write_predictions_csv(std::span<const PredictionRow> rows, std::ostream& out);

/// Pairs each test trace with its predicted label, in test-set order.
/// Throws ValidationError reporting how many ids are missing on each side.
std::vector<Prediction> join_predictions(const Dataset& test, std::span<const PredictionRow> rows);

}  // namespace imago
