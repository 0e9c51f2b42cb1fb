#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "imago/trace.hpp"

namespace imago {

struct SyntheticSource {
  std::uint64_t seed = 0;
  friend bool operator==(const SyntheticSource&, const SyntheticSource&) = default;
};
struct FileSource {
  std::string path;
  friend bool operator==(const FileSource&, const FileSource&) = default;
};
using Provenance = std::variant<SyntheticSource, FileSource>;

/// An ordered corpus of traces sharing one image shape.
struct Dataset {
  ImageShape shape;
  std::vector<Trace> traces;
  Provenance provenance = FileSource{};

  std::size_t size() const noexcept { return traces.size(); }
  std::vector<double> labels() const;

  /// Shape positive, every event inside the shape, ids unique.
  void validate() const;
};

/// Same shape and identical trace sequence; provenance is ignored.
bool same_content(const Dataset& a, const Dataset& b);

/// JSON-lines reader. Line 1 is {"n_features":int,"horizon":int}; each later
/// non-blank line is {"id":str,"xi":float,"events":[[feature,time],...]}.
/// Errors name the 1-based line number. When `expected` is given the header
/// must match it.
Dataset read_traces(std::istream& in, const std::string& source_name,
                    std::optional<ImageShape> expected = std::nullopt);
Dataset load_traces(const std::filesystem::path& path,
                    std::optional<ImageShape> expected = std::nullopt);

void write_traces(const Dataset& dataset, std::ostream& out);
void save_traces(const Dataset& dataset, const std::filesystem::path& path);

struct SplitOptions {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Split each cluster separately (clusters from assign_cluster with `levels`).
  bool stratify = false;
  int levels = 10;
};

struct SplitResult {
  Dataset train;
  Dataset test;
};

/// Number of test samples for n traces: ceil(fraction * n), kept in [1, n-1].
std::size_t test_count(std::size_t n, double test_fraction);

/// Seeded shuffle, then the first test_count() shuffled traces form the test
/// set. Both parts keep the original relative order of their traces.
SplitResult split(const Dataset& dataset, const SplitOptions& options);

/// Parameters of the separable-signature generator.
struct SynthSpec {
  ImageShape shape{};
  int levels = 10;
  int per_cluster_count = 1;
  /// Signature pixels per cluster; signatures are disjoint across clusters.
  int signature_pixels = 1;
  /// Probability that each non-signature pixel is switched on.
  double noise_flip_prob = 0.0;
  /// Fraction of the cluster band the labels spread over, centred on the
  /// band midpoint. 0 puts every label on the midpoint, 1 uses the whole band.
  double label_jitter = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

SynthSpec synth_spec_from_json(const std::string& json_text);
std::string synth_spec_to_json(const SynthSpec& spec);

/// Signature pixel sets, index c-1 for cluster c, each sorted.
std::vector<std::vector<FeatureEvent>> signature_pixels(const SynthSpec& spec);

/// Deterministic synthetic corpus, cluster-major order, ids "c<cluster>-<n>".
Dataset generate_synthetic(const SynthSpec& spec);

}  // namespace imago
