#include "imago/cli.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "imago/baselines.hpp"
#include "imago/cluster_model.hpp"
#include "imago/dataset.hpp"
#include "imago/encoder.hpp"
#include "imago/errors.hpp"
#include "imago/evaluation.hpp"
#include "imago/parallel.hpp"
#include "imago/report.hpp"

namespace imago {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";
const std::vector<std::string> kApproaches = {"ca", "pa", "fnn", "lam", "klam", "const"};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::vector<std::string> parse_approaches(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "all") {
      for (const auto& a : kApproaches) {
        if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
      }
      continue;
    }
    if (std::find(kApproaches.begin(), kApproaches.end(), item) == kApproaches.end()) {
      throw ValidationError(fmt::format("unknown approach '{}' (expected one of ca, pa, fnn, lam, "
                                        "klam, const, all)",
                                        item));
    }
    if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
  }
  if (out.empty()) throw ValidationError("no approach selected");
  return out;
}

bool explicitly_named(const std::string& list, const std::string& name) {
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == name) return true;
  }
  return false;
}

void check_budget(ImageShape shape, int levels, double max_cells) {
  const double cells = static_cast<double>(shape.cells()) * levels;
  if (cells > max_cells) {
    throw ValidationError(fmt::format(
        "model of {} x {} x {} cells exceeds the memory budget of {} cells (--max-cells)",
        shape.features, shape.horizon, levels, max_cells));
  }
}

// Options shared by several subcommands.
struct Common {
  unsigned workers = 0;
  double max_cells = 2e9;
};

struct SynthArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
};

struct StatsArgs {
  std::string in, out;
  int bins = 10;
  double threshold = 0.5;
};

struct SplitArgs {
  std::string in, train_out, test_out;
  double test_frac = 0.2;
  std::uint64_t seed = 0;
  bool stratify = false;
  int levels = 10;
};

struct TrainArgs {
  std::string train, out, lam_out, klam_out, render;
  int levels = 10;
};

struct EvalArgs {
  std::string train, test, model, out, markdown, predictions_dir;
  std::string approach = "all";
  int levels = 10;
  int sweep_points = 10000;
};

struct ExportArgs {
  std::string in, out_dir, model;
  int levels = 10;
  bool reduce = false;
};

struct ImportArgs {
  std::string test, predictions, name = "dnn", out, markdown;
};

struct ReportArgs {
  std::string in, out;
  std::string format = "markdown";
};

struct CompareArgs {
  std::vector<std::string> reports;
  std::string out;
  std::string format = "markdown";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  auto spec = synth_spec_from_json(read_file(a.spec));
  if (a.seed) spec.seed = *a.seed;
  const auto ds = generate_synthetic(spec);
  save_traces(ds, a.out);
  out << fmt::format("wrote {} traces ({}x{}, {} clusters) to {}\n", ds.size(), spec.shape.features,
                     spec.shape.horizon, spec.levels, a.out);
  return 0;
}

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const auto ds = load_traces(a.in);
  const auto stats = label_stats(ds.traces, a.bins);
  nlohmann::ordered_json j;
  j["samples"] = stats.total();
  j["bins"] = a.bins;
  j["histogram"] = stats.histogram;
  j["cdf"] = stats.cdf;
  j["threshold"] = a.threshold;
  j["fraction_above"] = stats.fraction_above(a.threshold);
  out << fmt::format("samples: {}\n", stats.total());
  for (std::size_t b = 0; b < stats.histogram.size(); ++b) {
    out << fmt::format("bin {:>3} [{:.3f}, {:.3f}{}: {:>8}  cdf {:.4f}\n", b + 1,
                       static_cast<double>(b) / a.bins, static_cast<double>(b + 1) / a.bins,
                       b + 1 == stats.histogram.size() ? "]" : ")", stats.histogram[b],
                       stats.cdf[b]);
  }
  out << fmt::format("fraction with xi > {}: {:.4f}\n", a.threshold, stats.fraction_above(a.threshold));
  if (!a.out.empty()) write_file(a.out, j.dump(2) + "\n");
  return 0;
}

int cmd_split(SplitArgs a, std::ostream& out) {
  const auto ds = load_traces(a.in);
  const fs::path in(a.in);
  const auto stem = (in.parent_path() / in.stem()).string();
  if (a.train_out.empty()) a.train_out = stem + ".train.jsonl";
  if (a.test_out.empty()) a.test_out = stem + ".test.jsonl";
  const auto parts = split(ds, {a.test_frac, a.seed, a.stratify, a.levels});
  save_traces(parts.train, a.train_out);
  save_traces(parts.test, a.test_out);
  out << fmt::format("train: {} traces -> {}\ntest: {} traces -> {}\n", parts.train.size(),
                     a.train_out, parts.test.size(), a.test_out);
  return 0;
}

int cmd_train(const TrainArgs& a, const Common& common, std::ostream& out) {
  const auto ds = load_traces(a.train);
  check_budget(ds.shape, a.levels, common.max_cells);
  const auto model = train_cluster_model(ds.traces, ds.shape, a.levels);
  model.save(a.out);
  out << fmt::format("cluster model: {} traces, {} clusters -> {}\n", model.training_size(),
                     model.levels(), a.out);
  const auto ks = kernels(model);
  for (int c = 1; c <= model.levels(); ++c) {
    const auto mean = model.mean_label(c);
    out << fmt::format("  cluster {:>3}: {:>8} traces, mean label {}, {} kernels\n", c,
                       model.weight(c), mean ? fmt::format("{:.4f}", *mean) : std::string("-"),
                       ks.count(c));
  }
  if (!a.lam_out.empty()) {
    lam_train(ds.traces, ds.shape).save(a.lam_out);
    out << fmt::format("lattice memory -> {}\n", a.lam_out);
  }
  if (!a.klam_out.empty()) {
    kernel_lam_train(ds.traces, model).save(a.klam_out);
    out << fmt::format("kernel lattice memory -> {}\n", a.klam_out);
  }
  if (!a.render.empty()) {
    render_clustering_image(model, a.render);
    out << fmt::format("clustering image -> {}\n", a.render);
  }
  return 0;
}

std::vector<Prediction> predict_all(const Dataset& test, unsigned workers,
                                    const std::function<double(const BinaryImage&)>& predict) {
  std::vector<Prediction> preds(test.size());
  parallel_chunks(test.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& t = test.traces[i];
      preds[i] = {t.xi(), predict(encode(t, test.shape))};
    }
  });
  return preds;
}

void write_predictions(const fs::path& dir, const std::string& name, const Dataset& test,
                       const std::vector<Prediction>& preds) {
  std::vector<PredictionRow> rows;
  rows.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) rows.push_back({test.traces[i].id(), preds[i].estimate});
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  std::ostringstream csv;
  write_predictions_csv(rows, csv);
  write_file(dir / (name + ".csv"), csv.str());
}

void emit_outputs(const std::vector<EvalReport>& reports, const std::string& json_out,
                  const std::string& md_out, std::ostream& out) {
  for (const auto& r : reports) {
    out << fmt::format("{:<6} MCAE {:.4f}  total accuracy {:.4f}  conservativeness {}\n", r.approach,
                       r.mcae, r.total_accuracy,
                       std::isinf(r.conservativeness) ? std::string("inf")
                                                      : fmt::format("{:.4f}", r.conservativeness));
  }
  if (!json_out.empty()) write_file(json_out, emit_report(reports, ReportFormat::json));
  if (!md_out.empty()) write_file(md_out, emit_report(reports, ReportFormat::markdown));
}

int cmd_eval(const EvalArgs& a, const Common& common, std::ostream& out) {
  const auto approaches = parse_approaches(a.approach);
  const auto train = load_traces(a.train);
  const auto test = load_traces(a.test, train.shape);
  check_budget(train.shape, a.levels, common.max_cells);
  if (train.traces.empty() || test.traces.empty()) throw ValidationError("eval: empty train or test set");

  std::optional<ClusterModel> model;
  auto cluster_model = [&]() -> const ClusterModel& {
    if (!model) {
      if (!a.model.empty()) {
        model = ClusterModel::load(a.model);
        if (model->shape() != train.shape || model->levels() != a.levels) {
          throw ValidationError("eval: --model dims or levels do not match the data");
        }
      } else {
        model = train_cluster_model(train.traces, train.shape, a.levels);
      }
    }
    return *model;
  };

  std::vector<EvalReport> reports;
  for (const auto& name : approaches) {
    std::vector<Prediction> preds;
    if (name == "ca") {
      const auto& m = cluster_model();
      preds = predict_all(test, common.workers, [&](const BinaryImage& z) { return classify_ca(m, z).xi_hat; });
    } else if (name == "pa") {
      const auto& m = cluster_model();
      preds = predict_all(test, common.workers, [&](const BinaryImage& z) { return classify_pa(m, z).xi_hat; });
    } else if (name == "fnn") {
      const NeighborIndex index(train.traces, train.shape);
      preds = predict_all(test, common.workers, [&](const BinaryImage& z) { return fnn_predict(index, z).xi_hat; });
    } else if (name == "klam" && !explicitly_named(a.approach, "klam") &&
               kernel_sample_indices(train.traces, cluster_model()).empty()) {
      // Noise can leave no cell owned by a single cluster; `all` moves on.
      out << "klam: skipped, no training sample contains a kernel of its cluster\n";
      continue;
    } else if (name == "lam" || name == "klam") {
      const auto memory = name == "lam" ? lam_train(train.traces, train.shape)
                                        : kernel_lam_train(train.traces, cluster_model());
      preds = predict_all(test, common.workers, [&](const BinaryImage& z) { return lam_predict(memory, z); });
    } else {
      const auto labels = train.labels();
      const double c = constant_sweep(labels, a.sweep_points).best_constant();
      preds.reserve(test.size());
      for (const auto& t : test.traces) preds.push_back({t.xi(), c});
    }
    if (!a.predictions_dir.empty()) write_predictions(a.predictions_dir, name, test, preds);
    reports.push_back(evaluate(name, preds));
  }
  emit_outputs(reports, a.out, a.markdown, out);
  return 0;
}

int cmd_export(const ExportArgs& a, std::ostream& out) {
  const auto ds = load_traces(a.in);
  ExportOptions options;
  options.levels = a.levels;
  if (a.reduce && a.model.empty()) throw ValidationError("export-images: --reduce needs --model");
  if (!a.model.empty()) {
    const auto model = ClusterModel::load(a.model);
    if (model.shape() != ds.shape || model.levels() != a.levels) {
      throw ValidationError("export-images: --model dims or levels do not match the data");
    }
    for (int c = 1; c <= model.levels(); ++c) options.cluster_means.push_back(model.mean_label(c));
    if (a.reduce) options.mask = compute_reduction_mask(model.ci_slices());
  }
  export_images(ds, a.out_dir, options);
  const auto shape = options.mask ? options.mask->reduced_shape() : ds.shape;
  out << fmt::format("exported {} images ({}x{}) to {}\n", ds.size(), shape.features, shape.horizon,
                     a.out_dir);
  return 0;
}

int cmd_import(const ImportArgs& a, std::ostream& out) {
  const auto test = load_traces(a.test);
  const auto rows = load_predictions_csv(a.predictions);
  const auto preds = join_predictions(test, rows);
  if (preds.empty()) throw ValidationError("import-predictions: empty test set");
  const std::vector<EvalReport> reports{evaluate(a.name, preds)};
  emit_outputs(reports, a.out, a.markdown, out);
  return 0;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto reports = parse_report_json(read_file(a.in));
  const auto text = emit_report(reports, parse_report_format(a.format));
  if (a.out.empty()) {
    out << text;
  } else {
    write_file(a.out, text);
  }
  return 0;
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  std::vector<EvalReport> all;
  for (const auto& path : a.reports) {
    for (auto& r : parse_report_json(read_file(path))) all.push_back(std::move(r));
  }
  if (all.size() < 2) throw ValidationError("compare: need at least two approaches");
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      if (all[i].approach == all[j].approach) {
        throw ValidationError(fmt::format("compare: approach '{}' appears twice", all[i].approach));
      }
    }
  }
  const auto text = emit_report(all, parse_report_format(a.format));
  if (a.out.empty()) {
    out << text;
  } else {
    write_file(a.out, text);
  }
  return 0;
}

// Config keys become option tokens placed before the user's own flags; with
// TakeLast every explicit flag then overrides the config value.
std::vector<std::string> inject_config(const std::vector<std::string>& args, CLI::App& app) {
  std::vector<std::string> rest;
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config_path) return rest;

  nlohmann::json config;
  try {
    config = nlohmann::json::parse(read_file(*config_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("config: malformed JSON ({})", e.what()));
  }
  if (!config.is_object()) throw ValidationError("config: top level must be an object");

  const auto sub_pos = std::find_if(rest.begin(), rest.end(), [&](const std::string& s) {
    return app.get_subcommand_no_throw(s) != nullptr;
  });
  if (sub_pos == rest.end()) return rest;
  CLI::App* sub = app.get_subcommand(*sub_pos);

  std::vector<std::string> injected;
  for (const auto& [key, value] : config.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) injected.push_back(flag);
    } else if (value.is_array()) {
      injected.push_back(flag);
      for (const auto& v : value) injected.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      injected.push_back(flag);
      injected.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  rest.insert(sub_pos + 1, injected.begin(), injected.end());
  return rest;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Image-based maliciousness-level detectors for behavioral traces", "imago"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       fmt::format("imago {}\ntrace-jsonl 1\ncluster-model {}\nlattice-memory {}\n"
                                   "image-manifest {}\nreport {}\npredictions-csv 1",
                                   kVersion, kModelFormatVersion, kModelFormatVersion,
                                   kManifestSchemaVersion, kReportSchemaVersion));
  std::string config_placeholder;
  app.add_option("--config", config_placeholder, "JSON file of option values; flags win");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--workers", common.workers, "Worker threads (0 = all cores)");
    sub->add_option("--max-cells", common.max_cells, "Upper bound on levels*features*horizon");
  };

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic trace dataset");
  s_synth->add_option("--spec", synth.spec, "Generator spec JSON")->required();
  s_synth->add_option("--out", synth.out, "Output JSONL")->required();
  s_synth->add_option("--seed", synth.seed, "Override the spec seed");

  StatsArgs stats;
  auto* s_stats = app.add_subcommand("stats", "Label histogram and CDF");
  s_stats->add_option("--in", stats.in, "Trace JSONL")->required();
  s_stats->add_option("--bins", stats.bins, "Histogram bins");
  s_stats->add_option("--threshold", stats.threshold, "Threshold for fraction_above");
  s_stats->add_option("--out", stats.out, "Optional JSON output");

  SplitArgs split_args;
  auto* s_split = app.add_subcommand("split", "Seeded train/test split");
  s_split->add_option("--in", split_args.in, "Trace JSONL")->required();
  s_split->add_option("--test-frac", split_args.test_frac, "Test fraction in (0,1)");
  s_split->add_option("--seed", split_args.seed, "Shuffle seed");
  s_split->add_option("--train-out", split_args.train_out, "Train JSONL (default <in>.train.jsonl)");
  s_split->add_option("--test-out", split_args.test_out, "Test JSONL (default <in>.test.jsonl)");
  s_split->add_flag("--stratify", split_args.stratify, "Split each cluster separately");
  s_split->add_option("--levels", split_args.levels, "Clusters used by --stratify");

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "Build the cluster model (and optional memories)");
  s_train->add_option("--train", train.train, "Training JSONL")->required();
  s_train->add_option("--levels", train.levels, "Maliciousness levels");
  s_train->add_option("--out", train.out, "Cluster model file")->required();
  s_train->add_option("--lam-out", train.lam_out, "Lattice memory file");
  s_train->add_option("--klam-out", train.klam_out, "Kernel lattice memory file");
  s_train->add_option("--render", train.render, "Clustering image PGM");
  add_common(s_train);

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "Evaluate approaches on a test set");
  s_eval->add_option("--train", eval.train, "Training JSONL")->required();
  s_eval->add_option("--test", eval.test, "Test JSONL")->required();
  s_eval->add_option("--levels", eval.levels, "Maliciousness levels");
  s_eval->add_option("--approach", eval.approach, "Comma list of ca,pa,fnn,lam,klam,const or all");
  s_eval->add_option("--model", eval.model, "Pre-trained cluster model");
  s_eval->add_option("--out", eval.out, "Report JSON");
  s_eval->add_option("--markdown", eval.markdown, "Report markdown");
  s_eval->add_option("--predictions-dir", eval.predictions_dir, "Write <approach>.csv predictions");
  s_eval->add_option("--sweep-points", eval.sweep_points, "Grid size for the constant predictor");
  add_common(s_eval);

  ExportArgs exp;
  auto* s_export = app.add_subcommand("export-images", "Write PGM images per cluster folder");
  s_export->add_option("--in", exp.in, "Trace JSONL")->required();
  s_export->add_option("--levels", exp.levels, "Maliciousness levels");
  s_export->add_option("--out-dir", exp.out_dir, "Output directory")->required();
  s_export->add_option("--model", exp.model, "Cluster model (cluster means, reduction mask)");
  s_export->add_flag("--reduce", exp.reduce, "Drop feature rows and time columns unused by the model");

  ImportArgs imp;
  auto* s_import = app.add_subcommand("import-predictions", "Evaluate an external predictions CSV");
  s_import->add_option("--test", imp.test, "Test JSONL")->required();
  s_import->add_option("--predictions", imp.predictions, "CSV with header id,xi_hat")->required();
  s_import->add_option("--name", imp.name, "Approach name");
  s_import->add_option("--out", imp.out, "Report JSON");
  s_import->add_option("--markdown", imp.markdown, "Report markdown");

  ReportArgs rep;
  auto* s_report = app.add_subcommand("report", "Re-render a report JSON");
  s_report->add_option("--in", rep.in, "Report JSON")->required();
  s_report->add_option("--format", rep.format, "markdown or json");
  s_report->add_option("--out", rep.out, "Output file (default stdout)");

  CompareArgs cmp;
  auto* s_compare = app.add_subcommand("compare", "Merge reports into one comparison table");
  s_compare->add_option("--reports", cmp.reports, "Report JSON files")->required()->expected(1, -1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  s_compare->add_option("--format", cmp.format, "markdown or json");
  s_compare->add_option("--out", cmp.out, "Output file (default stdout)");

  try {
    auto tokens = inject_config(args, app);
    std::reverse(tokens.begin(), tokens.end());
    app.parse(tokens);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*s_synth) return cmd_synth(synth, out);
    if (*s_stats) return cmd_stats(stats, out);
    if (*s_split) return cmd_split(split_args, out);
    if (*s_train) return cmd_train(train, common, out);
    if (*s_eval) return cmd_eval(eval, common, out);
    if (*s_export) return cmd_export(exp, out);
    if (*s_import) return cmd_import(imp, out);
    if (*s_report) return cmd_report(rep, out);
    if (*s_compare) return cmd_compare(cmp, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace imago
