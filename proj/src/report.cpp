#include "imago/report.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "imago/errors.hpp"

namespace imago {

using nlohmann::ordered_json;

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  throw ValidationError(fmt::format("unknown report format '{}'", name));
}

std::string band_label(int cls, int classes) {
  const double lo = static_cast<double>(cls - 1) / classes;
  const double hi = static_cast<double>(cls) / classes;
  return fmt::format("{:.1f} <= xi' {} {:.1f}", lo, cls == classes ? "<=" : "<", hi);
}

namespace {

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json ratio_json(double v) { return std::isinf(v) ? ordered_json("inf") : ordered_json(v); }

ordered_json report_json(const EvalReport& r) {
  ordered_json j;
  j["approach"] = r.approach;
  j["samples"] = r.samples;
  j["mcae"] = r.mcae;
  j["conservativeness"] = ratio_json(r.conservativeness);
  j["total_accuracy"] = r.total_accuracy;
  j["regions"] = {{"R5", r.regions.upper}, {"R6", r.regions.lower}, {"R7", r.regions.diagonal}};
  auto cm = ordered_json::array();
  for (int row = 1; row <= r.confusion.classes(); ++row) {
    auto line = ordered_json::array();
    for (int col = 1; col <= r.confusion.classes(); ++col) line.push_back(r.confusion.at(row, col));
    cm.push_back(std::move(line));
  }
  j["confusion"] = std::move(cm);
  auto classes = ordered_json::array();
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    const auto& m = r.classes[i];
    ordered_json c;
    c["class"] = i + 1;
    c["tp"] = m.tp;
    c["fp"] = m.fp;
    c["fn"] = m.fn;
    c["tn"] = m.tn;
    c["accuracy"] = m.accuracy;
    c["error_rate"] = m.error_rate;
    c["precision"] = optional_number(m.precision);
    c["recall"] = m.recall;
    c["f1"] = optional_number(m.f1);
    classes.push_back(std::move(c));
  }
  j["classes"] = std::move(classes);
  j["running_mcae"] = r.running_mcae;
  return j;
}

std::string metric_cell(const std::optional<double>& v) {
  return v ? fmt::format("{:.3f}", *v) : std::string("-");
}

std::string emit_markdown(std::span<const EvalReport> reports) {
  std::string out = "# Evaluation report\n\n## Per-class metrics\n\n| Estimated label |";
  std::string rule = "|---|";
  for (const auto& r : reports) {
    for (const char* m : {"Acc", "Pre", "Rec", "F1-S"}) {
      out += fmt::format(" {} {} |", r.approach, m);
      rule += "---:|";
    }
  }
  out += "\n" + rule + "\n";

  const int classes = reports.front().confusion.classes();
  for (int i = 1; i <= classes; ++i) {
    out += fmt::format("| {} |", band_label(i, classes));
    for (const auto& r : reports) {
      const auto& m = r.classes[static_cast<std::size_t>(i - 1)];
      out += fmt::format(" {} | {} | {} | {} |", metric_cell(m.accuracy), metric_cell(m.precision),
                         metric_cell(m.recall), metric_cell(m.f1));
    }
    out += "\n";
  }
  if (reports.size() >= 2) {
    out += "| Per class metric score |";
    for (const auto& s : per_class_score(reports)) {
      out += fmt::format(" {} | {} | {} | {} |", s.accuracy, s.precision, s.recall, s.f1);
    }
    out += "\n";
  }

  out += "\n## Summary\n\n| Metric |";
  std::string summary_rule = "|---|";
  for (const auto& r : reports) {
    out += fmt::format(" {} |", r.approach);
    summary_rule += "---:|";
  }
  out += "\n" + summary_rule + "\n";
  auto row = [&](const char* name, auto cell) {
    out += fmt::format("| {} |", name);
    for (const auto& r : reports) out += fmt::format(" {} |", cell(r));
    out += "\n";
  };
  row("Samples", [](const EvalReport& r) { return fmt::format("{}", r.samples); });
  row("MCAE", [](const EvalReport& r) { return fmt::format("{:.2f}%", 100.0 * r.mcae); });
  row("Conservativeness ratio", [](const EvalReport& r) {
    return std::isinf(r.conservativeness) ? std::string("inf")
                                          : fmt::format("{:.4f}", r.conservativeness);
  });
  row("Total accuracy",
      [](const EvalReport& r) { return fmt::format("{:.2f}%", 100.0 * r.total_accuracy); });
  row("R5 / R6 / R7", [](const EvalReport& r) {
    return fmt::format("{} / {} / {}", r.regions.upper, r.regions.lower, r.regions.diagonal);
  });
  return out;
}

}  // namespace

std::string emit_report(std::span<const EvalReport> reports, ReportFormat format) {
  if (reports.empty()) throw ValidationError("report: no approaches to report");
  if (format == ReportFormat::markdown) return emit_markdown(reports);

  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  auto approaches = ordered_json::array();
  for (const auto& r : reports) approaches.push_back(report_json(r));
  j["approaches"] = std::move(approaches);
  if (reports.size() >= 2) {
    auto scores = ordered_json::array();
    for (const auto& s : per_class_score(reports)) {
      scores.push_back({{"approach", s.approach},
                        {"accuracy", s.accuracy},
                        {"precision", s.precision},
                        {"recall", s.recall},
                        {"f1", s.f1}});
    }
    j["per_class_score"] = std::move(scores);
  }
  return j.dump(2) + "\n";
}

std::vector<EvalReport> parse_report_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ValidationError(fmt::format("report: malformed JSON ({})", e.what()));
  }
  std::vector<EvalReport> out;
  try {
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw ValidationError("report: unsupported schema_version");
    }
    for (const auto& a : j.at("approaches")) {
      EvalReport r;
      r.approach = a.at("approach").get<std::string>();
      r.samples = a.at("samples").get<std::uint64_t>();
      r.mcae = a.at("mcae").get<double>();
      r.running_mcae = a.at("running_mcae").get<std::vector<double>>();
      const auto& cm = a.at("confusion");
      r.confusion = ConfusionMatrix(static_cast<int>(cm.size()));
      for (std::size_t row = 0; row < cm.size(); ++row) {
        if (cm[row].size() != cm.size()) throw ValidationError("report: confusion matrix not square");
        for (std::size_t col = 0; col < cm.size(); ++col) {
          r.confusion.add(static_cast<int>(row + 1), static_cast<int>(col + 1),
                          cm[row][col].get<std::uint64_t>());
        }
      }
      if (r.confusion.total() != r.samples) {
        throw ValidationError(fmt::format("report: approach '{}' confusion total {} != samples {}",
                                          r.approach, r.confusion.total(), r.samples));
      }
      r.regions = regions(r.confusion);
      r.classes = per_class(r.confusion);
      r.conservativeness = conservativeness(r.confusion);
      r.total_accuracy = total_accuracy(r.confusion);
      out.push_back(std::move(r));
    }
  } catch (const ordered_json::exception& e) {
    throw ValidationError(fmt::format("report: {}", e.what()));
  }
  return out;
}

std::vector<PredictionRow> read_predictions_csv(std::istream& in, const std::string& source_name) {
  std::vector<PredictionRow> rows;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  auto fail = [&](const std::string& what) -> void {
    throw ValidationError(fmt::format("{}:{}: {}", source_name, number, what));
  };
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line != "id,xi_hat") fail("expected header 'id,xi_hat'");
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0) fail("expected 'id,xi_hat'");
    PredictionRow row{line.substr(0, comma), 0.0};
    const std::string value = line.substr(comma + 1);
    std::size_t used = 0;
    try {
      row.xi_hat = std::stod(value, &used);
    } catch (const std::exception&) {
      fail(fmt::format("xi_hat '{}' is not a number", value));
    }
    if (used != value.size()) fail(fmt::format("xi_hat '{}' is not a number", value));
    if (!(row.xi_hat >= 0.0 && row.xi_hat <= 1.0)) fail(fmt::format("label out of range: {}", value));
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ValidationError(fmt::format("{}: missing header 'id,xi_hat'", source_name));
  return rows;
}

std::vector<PredictionRow> load_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_predictions_csv(in, path.string());
}

void write_predictions_csv(std::span<const PredictionRow> rows, std::ostream& out) {
  out << "id,xi_hat\n";
  for (const auto& r : rows) out << r.id << ',' << fmt::format("{}", r.xi_hat) << '\n';
}

std::vector<Prediction> join_predictions(const Dataset& test, std::span<const PredictionRow> rows) {
  std::unordered_map<std::string, double> by_id;
  std::size_t duplicates = 0;
  for (const auto& r : rows) {
    if (!by_id.emplace(r.id, r.xi_hat).second) ++duplicates;
  }
  if (duplicates > 0) throw ValidationError(fmt::format("predictions: {} duplicate ids", duplicates));

  std::vector<Prediction> out;
  out.reserve(test.size());
  std::size_t missing = 0;
  for (const auto& t : test.traces) {
    const auto it = by_id.find(t.id());
    if (it == by_id.end()) {
      ++missing;
      continue;
    }
    out.push_back({t.xi(), it->second});
  }
  const std::size_t extra = rows.size() - out.size();
  if (missing > 0 || extra > 0) {
    throw ValidationError(fmt::format(
        "predictions do not match the test set: {} test ids without a prediction, {} "
        "predictions for unknown ids ({} test traces, {} prediction rows)",
        missing, extra, test.size(), rows.size()));
  }
  return out;
}

}  // namespace imago
