#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imago/binary_image.hpp"
#include "imago/trace.hpp"

namespace imago {

/// Per-cluster training summary.
///
/// The clustering image CI is conceptually an n_features x (horizon*levels)
/// binary matrix whose block c (columns (c-1)*horizon .. c*horizon-1) marks
/// every (feature, time) used by some training trace of cluster c. It is
/// stored as one BinaryImage per cluster. PI counts the traces behind each
/// CI cell, CW the traces per cluster and CL the sum of their labels.
///
/// Invariants: PI > 0 iff CI = 1; PI <= CW of its cluster; CL <= CW;
/// sum of CW = training size.
class ClusterModel {
public:
  ClusterModel(ImageShape shape, int levels);

  ImageShape shape() const noexcept { return shape_; }
  int levels() const noexcept { return levels_; }

  /// Cluster indices are 1-based throughout.
  const BinaryImage& ci_slice(int cluster) const { return ci_.at(slot(cluster)); }
  std::span<const BinaryImage> ci_slices() const noexcept { return ci_; }
  /// Cell coordinates (`row`, `col`) are 0-based, like BinaryImage.
  /// CI as one matrix; `col` is in [0, horizon*levels).
  bool ci_at(int row, int col) const;
  /// CI as a single n_features x (horizon*levels) image.
  BinaryImage clustering_image() const;

  std::uint32_t pi(int cluster, int row, int col) const;
  std::span<const std::uint32_t> pi_slice(int cluster) const { return pi_.at(slot(cluster)); }
  /// Sum of PI over a cluster slice.
  std::uint64_t pi_total(int cluster) const { return pi_totals_.at(slot(cluster)); }

  std::uint64_t weight(int cluster) const { return cw_.at(slot(cluster)); }
  double label_sum(int cluster) const { return cl_.at(slot(cluster)); }
  /// CL/CW, or nullopt for an empty cluster.
  std::optional<double> mean_label(int cluster) const;
  std::uint64_t training_size() const noexcept;

  /// Throws ValidationError describing the first broken invariant.
  void validate() const;

  /// Binary model file: version byte (1), magic "IMCM", u32 n_features,
  /// u32 horizon, u32 levels, CI bitmap (row-major over the full
  /// n_features x horizon*levels matrix, LSB-first within each byte),
  /// PI as one LEB128 varint per cell in the same order, then CW as u64
  /// and CL as f64, one per cluster. All integers little-endian.
  std::string serialize() const;
  static ClusterModel deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static ClusterModel load(const std::filesystem::path& path);

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;

private:
  friend ClusterModel train_cluster_model(std::span<const Trace>, ImageShape, int);

  std::size_t slot(int cluster) const;
  void refresh_totals();

  ImageShape shape_;
  int levels_;
  std::vector<BinaryImage> ci_;
  std::vector<std::vector<std::uint32_t>> pi_;
  std::vector<std::uint64_t> cw_;
  std::vector<double> cl_;
  // Sum of PI over each slice; cached for the probabilistic distance.
  std::vector<std::uint64_t> pi_totals_;
};

/// Builds CI/PI/CW/CL. The result does not depend on trace order: labels are
/// summed per cluster in sorted order. Throws ValidationError on an empty set.
ClusterModel train_cluster_model(std::span<const Trace> traces, ImageShape shape, int levels);

struct ClusterDecision {
  int cluster = 0;
  double xi_hat = 0.0;
  /// Distance of the test image to the chosen cluster slice.
  double distance = 0.0;
};

/// Cluster approach: argmin over non-empty clusters of sum |Z - CI slice|,
/// smallest index on ties, estimate CL/CW of the winner.
ClusterDecision classify_ca(const ClusterModel& model, const BinaryImage& image);

/// Probabilistic approach: argmin of sum |Z - CI*PI/CW| over non-empty
/// clusters, smallest index on ties. Distances are compared exactly as
/// rationals, so ties are genuine ties.
ClusterDecision classify_pa(const ClusterModel& model, const BinaryImage& image);

/// Per-cluster distances (nullopt for empty clusters); used for diagnostics.
std::vector<std::optional<double>> ca_distances(const ClusterModel& model, const BinaryImage& image);
std::vector<std::optional<double>> pa_distances(const ClusterModel& model, const BinaryImage& image);

/// Cells set in exactly one cluster's CI slice.
struct KernelSet {
  /// masks[c-1] marks the kernel cells of cluster c.
  std::vector<BinaryImage> masks;

  std::size_t count(int cluster) const { return masks.at(static_cast<std::size_t>(cluster - 1)).popcount(); }
  /// 1-based (feature, time) positions of a cluster's kernels, sorted.
  std::vector<FeatureEvent> positions(int cluster) const;
};

KernelSet kernels(const ClusterModel& model);

/// CI written as PGM: width horizon*levels, height n_features, white = 1.
void render_clustering_image(const ClusterModel& model, const std::filesystem::path& path);

}  // namespace imago
