#include "imago/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "imago/errors.hpp"
#include "imago/rng.hpp"

namespace imago {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<double> Dataset::labels() const {
  std::vector<double> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(t.xi());
  return out;
}

void Dataset::validate() const {
  shape.validate();
  std::unordered_set<std::string> ids;
  for (const auto& t : traces) {
    if (!ids.insert(t.id()).second) throw ValidationError(fmt::format("duplicate id '{}'", t.id()));
    for (const auto& e : t.events()) {
      if (!shape.contains(e)) {
        throw ValidationError(fmt::format("trace '{}': event ({},{}) outside {}x{}", t.id(),
                                          e.feature, e.time, shape.features, shape.horizon));
      }
    }
  }
}

bool same_content(const Dataset& a, const Dataset& b) {
  return a.shape == b.shape && a.traces == b.traces;
}

namespace {

[[noreturn]] void line_error(const std::string& source, std::size_t line, const std::string& what) {
  throw ValidationError(fmt::format("{}:{}: {}", source, line, what));
}

int read_positive_int(const json& j, const char* field, const std::string& source,
                      std::size_t line) {
  if (!j.contains(field) || !j[field].is_number_integer()) {
    line_error(source, line, fmt::format("field '{}' missing or not an integer", field));
  }
  const auto v = j[field].get<std::int64_t>();
  if (v <= 0 || v > std::numeric_limits<int>::max()) {
    line_error(source, line, fmt::format("field '{}' must be a positive int", field));
  }
  return static_cast<int>(v);
}

Trace parse_trace_line(const json& j, ImageShape shape, const std::string& source,
                       std::size_t line) {
  if (!j.is_object()) line_error(source, line, "record is not a JSON object");
  if (!j.contains("id") || !j["id"].is_string()) {
    line_error(source, line, "field 'id' missing or not a string");
  }
  if (!j.contains("xi") || !j["xi"].is_number()) {
    line_error(source, line, "field 'xi' missing or not a number");
  }
  if (!j.contains("events") || !j["events"].is_array()) {
    line_error(source, line, "field 'events' missing or not an array");
  }
  const double xi = j["xi"].get<double>();
  if (!(xi >= 0.0 && xi <= 1.0)) line_error(source, line, fmt::format("label out of range: {}", xi));

  std::vector<FeatureEvent> events;
  events.reserve(j["events"].size());
  for (const auto& ev : j["events"]) {
    if (!ev.is_array() || ev.size() != 2 || !ev[0].is_number_integer() ||
        !ev[1].is_number_integer()) {
      line_error(source, line, "field 'events': each event must be [feature, time]");
    }
    const auto feature = ev[0].get<std::int64_t>();
    const auto time = ev[1].get<std::int64_t>();
    if (feature < 1 || feature > shape.features) {
      line_error(source, line, fmt::format("feature index out of range: {}", feature));
    }
    if (time < 1 || time > shape.horizon) {
      line_error(source, line, fmt::format("time index out of range: {}", time));
    }
    events.push_back({static_cast<int>(feature), static_cast<int>(time)});
  }
  return Trace(j["id"].get<std::string>(), MaliciousnessLevel(xi), std::move(events));
}

}  // namespace

Dataset read_traces(std::istream& in, const std::string& source_name,
                    std::optional<ImageShape> expected) {
  Dataset ds;
  ds.provenance = FileSource{source_name};
  std::unordered_set<std::string> ids;

  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      line_error(source_name, line, fmt::format("malformed JSON ({})", e.what()));
    }
    if (!have_header) {
      if (!j.is_object()) line_error(source_name, line, "header is not a JSON object");
      ds.shape = {read_positive_int(j, "n_features", source_name, line),
                  read_positive_int(j, "horizon", source_name, line)};
      if (expected && *expected != ds.shape) {
        line_error(source_name, line,
                   fmt::format("dims mismatch: file is {}x{}, expected {}x{}", ds.shape.features,
                               ds.shape.horizon, expected->features, expected->horizon));
      }
      have_header = true;
      continue;
    }
    auto trace = parse_trace_line(j, ds.shape, source_name, line);
    if (!ids.insert(trace.id()).second) {
      line_error(source_name, line, fmt::format("duplicate id '{}'", trace.id()));
    }
    ds.traces.push_back(std::move(trace));
  }
  if (!have_header) throw ValidationError(fmt::format("{}: missing header line", source_name));
  return ds;
}

Dataset load_traces(const std::filesystem::path& path, std::optional<ImageShape> expected) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_traces(in, path.string(), expected);
}

void write_traces(const Dataset& dataset, std::ostream& out) {
  ordered_json header;
  header["n_features"] = dataset.shape.features;
  header["horizon"] = dataset.shape.horizon;
  out << header.dump() << '\n';
  for (const auto& t : dataset.traces) {
    ordered_json rec;
    rec["id"] = t.id();
    rec["xi"] = t.xi();
    auto events = ordered_json::array();
    for (const auto& e : t.events()) events.push_back({e.feature, e.time});
    rec["events"] = std::move(events);
    out << rec.dump() << '\n';
  }
}

void save_traces(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  write_traces(dataset, out);
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::size_t test_count(std::size_t n, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError(fmt::format("test fraction must be in (0,1), got {}", test_fraction));
  }
  if (n < 2) throw ValidationError(fmt::format("cannot split a dataset of size {}", n));
  // The epsilon absorbs representation error, e.g. 0.2 * 10 landing just above 2.
  auto count = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(count, 1, n - 1);
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

SplitResult split(const Dataset& dataset, const SplitOptions& options) {
  const std::size_t n = dataset.size();
  test_count(n, options.test_fraction);  // validates

  Rng rng(options.seed);
  std::vector<bool> is_test(n, false);
  auto pick = [&](std::vector<std::size_t> members, std::size_t take) {
    shuffle(members, rng);
    for (std::size_t i = 0; i < take; ++i) is_test[members[i]] = true;
  };

  if (options.stratify) {
    std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(options.levels));
    for (std::size_t i = 0; i < n; ++i) {
      const int c = assign_cluster(dataset.traces[i].label(), options.levels);
      groups[static_cast<std::size_t>(c - 1)].push_back(i);
    }
    for (auto& g : groups) {
      if (g.size() < 2) continue;
      const auto take = test_count(g.size(), options.test_fraction);
      pick(std::move(g), take);
    }
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    pick(std::move(all), test_count(n, options.test_fraction));
  }

  SplitResult out{{dataset.shape, {}, dataset.provenance}, {dataset.shape, {}, dataset.provenance}};
  for (std::size_t i = 0; i < n; ++i) {
    (is_test[i] ? out.test : out.train).traces.push_back(dataset.traces[i]);
  }
  if (out.test.traces.empty() || out.train.traces.empty()) {
    throw ValidationError("stratified split left one side empty");
  }
  return out;
}

void SynthSpec::validate() const {
  shape.validate();
  if (levels < 1) throw ValidationError("synth: levels must be >= 1");
  if (per_cluster_count < 1) throw ValidationError("synth: per_cluster_count must be >= 1");
  if (signature_pixels < 0) throw ValidationError("synth: signature_pixels must be >= 0");
  if (static_cast<std::size_t>(signature_pixels) > shape.cells()) {
    throw ValidationError("synth: signature_pixels exceeds n_features * horizon");
  }
  if (static_cast<std::size_t>(signature_pixels) * static_cast<std::size_t>(levels) >
      shape.cells()) {
    throw ValidationError(fmt::format(
        "synth: {} disjoint signatures of {} pixels exceed the {} available cells", levels,
        signature_pixels, shape.cells()));
  }
  if (!(noise_flip_prob >= 0.0 && noise_flip_prob < 1.0)) {
    throw ValidationError("synth: noise_flip_prob must be in [0,1)");
  }
  if (!(label_jitter >= 0.0 && label_jitter <= 1.0)) {
    throw ValidationError("synth: label_jitter must be in [0,1]");
  }
}

SynthSpec synth_spec_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("synth spec: malformed JSON ({})", e.what()));
  }
  SynthSpec s;
  try {
    s.shape = {j.at("n_features").get<int>(), j.at("horizon").get<int>()};
    s.levels = j.value("levels", 10);
    s.per_cluster_count = j.at("per_cluster_count").get<int>();
    s.signature_pixels = j.at("signature_pixels").get<int>();
    s.noise_flip_prob = j.value("noise_flip_prob", 0.0);
    s.label_jitter = j.value("label_jitter", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("synth spec: {}", e.what()));
  }
  s.validate();
  return s;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  ordered_json j;
  j["n_features"] = spec.shape.features;
  j["horizon"] = spec.shape.horizon;
  j["levels"] = spec.levels;
  j["per_cluster_count"] = spec.per_cluster_count;
  j["signature_pixels"] = spec.signature_pixels;
  j["noise_flip_prob"] = spec.noise_flip_prob;
  j["label_jitter"] = spec.label_jitter;
  j["seed"] = spec.seed;
  return j.dump(2);
}

namespace {

FeatureEvent cell_event(std::size_t cell, int horizon) {
  const auto h = static_cast<std::size_t>(horizon);
  return {static_cast<int>(cell / h) + 1, static_cast<int>(cell % h) + 1};
}

std::vector<std::vector<FeatureEvent>> draw_signatures(const SynthSpec& spec, Rng& rng) {
  const std::size_t cells = spec.shape.cells();
  const auto k = static_cast<std::size_t>(spec.signature_pixels);
  const std::size_t needed = k * static_cast<std::size_t>(spec.levels);
  // Partial Fisher-Yates over all cells: the first `needed` slots are a
  // uniform sample without replacement.
  std::vector<std::size_t> pool(cells);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < needed; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(cells - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::vector<FeatureEvent>> sigs(static_cast<std::size_t>(spec.levels));
  for (std::size_t c = 0; c < sigs.size(); ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      sigs[c].push_back(cell_event(pool[c * k + i], spec.shape.horizon));
    }
    std::sort(sigs[c].begin(), sigs[c].end());
  }
  return sigs;
}

double draw_label(int cluster, int levels, double jitter, Rng& rng) {
  const double width = 1.0 / levels;
  const double mid = (cluster - 0.5) * width;
  double xi = mid + (rng.uniform01() - 0.5) * jitter * width;
  const MaliciousnessLevel probe(std::clamp(xi, 0.0, 1.0));
  xi = probe.value();
  // Nudge by ulps if rounding pushed the value across a band edge.
  while (assign_cluster(MaliciousnessLevel(xi), levels) > cluster) xi = std::nextafter(xi, 0.0);
  while (assign_cluster(MaliciousnessLevel(xi), levels) < cluster) xi = std::nextafter(xi, 1.0);
  return xi;
}

}  // namespace

std::vector<std::vector<FeatureEvent>> signature_pixels(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  return draw_signatures(spec, rng);
}

Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto sigs = draw_signatures(spec, rng);

  Dataset ds;
  ds.shape = spec.shape;
  ds.provenance = SyntheticSource{spec.seed};
  ds.traces.reserve(static_cast<std::size_t>(spec.levels) *
                    static_cast<std::size_t>(spec.per_cluster_count));

  const int width = static_cast<int>(std::to_string(spec.per_cluster_count - 1).size());
  for (int c = 1; c <= spec.levels; ++c) {
    const auto& sig = sigs[static_cast<std::size_t>(c - 1)];
    std::vector<bool> in_signature(spec.shape.cells(), false);
    for (const auto& e : sig) {
      in_signature[static_cast<std::size_t>(e.feature - 1) *
                       static_cast<std::size_t>(spec.shape.horizon) +
                   static_cast<std::size_t>(e.time - 1)] = true;
    }
    for (int i = 0; i < spec.per_cluster_count; ++i) {
      const double xi = draw_label(c, spec.levels, spec.label_jitter, rng);
      std::vector<FeatureEvent> events = sig;
      if (spec.noise_flip_prob > 0.0) {
        for (std::size_t cell = 0; cell < in_signature.size(); ++cell) {
          if (in_signature[cell]) continue;
          if (rng.bernoulli(spec.noise_flip_prob)) {
            events.push_back(cell_event(cell, spec.shape.horizon));
          }
        }
      }
      ds.traces.emplace_back(fmt::format("c{}-{:0{}}", c, i, width), MaliciousnessLevel(xi),
                             std::move(events));
    }
  }
  return ds;
}

}  // namespace imago
