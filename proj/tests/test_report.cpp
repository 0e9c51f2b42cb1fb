#include <doctest.h>

#include <json.hpp>
#include <fmt/format.h>
#include <limits>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "imago/errors.hpp"
#include "imago/report.hpp"

using namespace imago;

namespace {

std::vector<EvalReport> sample_reports() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Prediction> a, b;
  for (int i = 0; i < 80; ++i) {
    const double truth = u(rng);
    a.push_back({truth, std::min(1.0, truth + 0.1 * u(rng))});
    b.push_back({truth, u(rng)});
  }
  // Only over-estimates: the conservativeness ratio is infinite.
  const std::vector<Prediction> c{{0.15, 0.95}, {0.25, 0.25}};
  return {evaluate("near", a), evaluate("random", b), evaluate("high", c)};
}

std::vector<PredictionRow> csv(const std::string& text) {
  std::istringstream in(text);
  return read_predictions_csv(in, "p.csv");
}

}  // namespace

TEST_CASE("band labels") {
  CHECK(band_label(4) == "0.3 <= xi' < 0.4");
  CHECK(band_label(10) == "0.9 <= xi' <= 1.0");
}

TEST_CASE("report emission is deterministic and rejects an empty list") {
  const auto reports = sample_reports();
  CHECK(emit_report(reports, ReportFormat::json) == emit_report(reports, ReportFormat::json));
  CHECK(emit_report(reports, ReportFormat::markdown) == emit_report(reports, ReportFormat::markdown));
  CHECK_THROWS_AS(emit_report(std::span<const EvalReport>{}, ReportFormat::json), ValidationError);
  CHECK(parse_report_format("md") == ReportFormat::markdown);
  CHECK_THROWS_AS(parse_report_format("html"), ValidationError);
}

TEST_CASE("JSON report content") {
  const auto reports = sample_reports();
  const auto j = nlohmann::json::parse(emit_report(reports, ReportFormat::json));
  CHECK(j["schema_version"] == kReportSchemaVersion);
  REQUIRE(j["approaches"].size() == 3);
  CHECK(j["approaches"][2]["conservativeness"] == "inf");
  CHECK(j["approaches"][0]["mcae"].get<double>() == reports[0].mcae);
  CHECK(j["per_class_score"].size() == 3);
  bool saw_null = false;
  for (const auto& c : j["approaches"][2]["classes"]) saw_null |= c["precision"].is_null();
  CHECK(saw_null);
}

TEST_CASE("JSON round trip feeds the markdown renderer") {
  const auto reports = sample_reports();
  const auto json = emit_report(reports, ReportFormat::json);
  const auto back = parse_report_json(json);
  REQUIRE(back.size() == reports.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].approach == reports[i].approach);
    CHECK(back[i].confusion == reports[i].confusion);
    CHECK(back[i].mcae == reports[i].mcae);
    CHECK(back[i].running_mcae == reports[i].running_mcae);
  }
  CHECK(emit_report(back, ReportFormat::json) == json);

  const auto md = emit_report(back, ReportFormat::markdown);
  CHECK(md == emit_report(reports, ReportFormat::markdown));
  const auto j = nlohmann::json::parse(json);
  for (const auto& a : j["approaches"]) {
    CHECK(md.find(fmt::format("{:.2f}%", 100.0 * a["mcae"].get<double>())) != std::string::npos);
    CHECK(md.find(fmt::format("{:.2f}%", 100.0 * a["total_accuracy"].get<double>())) != std::string::npos);
  }
  CHECK(md.find("| inf |") != std::string::npos);
  CHECK(md.find(" - |") != std::string::npos);
  CHECK(md.find("| Per class metric score |") != std::string::npos);
}

TEST_CASE("markdown omits the score row for a single approach") {
  const auto reports = sample_reports();
  const auto md = emit_report(std::span<const EvalReport>(reports.data(), 1), ReportFormat::markdown);
  CHECK(md.find("Per class metric score") == std::string::npos);
  CHECK(md.find("near Acc") != std::string::npos);
}

TEST_CASE("malformed report JSON") {
  CHECK_THROWS_AS(parse_report_json("{}"), ValidationError);
  CHECK_THROWS_AS(parse_report_json("not json"), ValidationError);
  CHECK_THROWS_AS(parse_report_json(R"({"schema_version":99,"approaches":[]})"), ValidationError);
}

TEST_CASE("predictions CSV parsing") {
  const auto rows = csv("id,xi_hat\na,0.25\r\nb,1\n\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].id == "a");
  CHECK(rows[0].xi_hat == 0.25);
  CHECK(rows[1].xi_hat == 1.0);

  CHECK_THROWS_WITH_AS(csv("a,0.1\n"), doctest::Contains("p.csv:1"), ValidationError);
  CHECK_THROWS_WITH_AS(csv(""), doctest::Contains("missing header"), ValidationError);
  CHECK_THROWS_WITH_AS(csv("id,xi_hat\na,0.1\nb,x\n"), doctest::Contains("p.csv:3"), ValidationError);
  CHECK_THROWS_WITH_AS(csv("id,xi_hat\na,1.5\n"), doctest::Contains("out of range"), ValidationError);
  CHECK_THROWS_AS(csv("id,xi_hat\na,0.1z\n"), ValidationError);
  CHECK_THROWS_AS(csv("id,xi_hat\nnocomma\n"), ValidationError);

  std::ostringstream out;
  write_predictions_csv(rows, out);
  std::istringstream in(out.str());
  const auto again = read_predictions_csv(in, "mem");
  CHECK(again[0].xi_hat == rows[0].xi_hat);
  CHECK(again[1].id == "b");
}

TEST_CASE("joining predictions against the test set") {
  Dataset test{{1, 1}, {testing::trace("a", 0.1, {}), testing::trace("b", 0.7, {})}, FileSource{}};
  const std::vector<PredictionRow> rows{{"b", 0.6}, {"a", 0.2}};
  const auto joined = join_predictions(test, rows);
  REQUIRE(joined.size() == 2);
  CHECK(joined[0].truth == 0.1);
  CHECK(joined[0].estimate == 0.2);
  CHECK(joined[1].estimate == 0.6);

  const std::vector<PredictionRow> off{{"a", 0.2}, {"z", 0.3}, {"y", 0.3}};
  CHECK_THROWS_WITH_AS(join_predictions(test, off),
                       doctest::Contains("1 test ids without a prediction, 2 predictions for unknown ids"),
                       ValidationError);
  const std::vector<PredictionRow> dup{{"a", 0.2}, {"a", 0.3}, {"b", 0.3}};
  CHECK_THROWS_WITH_AS(join_predictions(test, dup), doctest::Contains("duplicate"), ValidationError);
}
