#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "imago/binary_image.hpp"
#include "imago/cluster_model.hpp"
#include "imago/trace.hpp"

namespace imago {

/// Every training image with its label, for first-nearest-neighbour search.
class NeighborIndex {
public:
  NeighborIndex(std::span<const Trace> traces, ImageShape shape);
  NeighborIndex(std::vector<BinaryImage> images, std::vector<double> labels);

  std::size_t size() const noexcept { return images_.size(); }
  ImageShape shape() const noexcept { return shape_; }
  const BinaryImage& image(std::size_t k) const { return images_.at(k); }
  double label(std::size_t k) const { return labels_.at(k); }

private:
  ImageShape shape_{};
  std::vector<BinaryImage> images_;
  std::vector<double> labels_;
};

struct NeighborMatch {
  std::size_t index = 0;
  std::size_t distance = 0;
  double xi_hat = 0.0;
};

/// Label of the training image with the smallest L1 distance; the smallest
/// index wins ties. The scan is split across `workers` (0 = all cores) and
/// the result does not depend on the worker count.
NeighborMatch fnn_predict(const NeighborIndex& index, const BinaryImage& image,
                          unsigned workers = 1);

/// Lattice associative memory: cells[i,j] = max_k (xi_k - Z^k[i,j]).
class LatticeMemory {
public:
  LatticeMemory(ImageShape shape, std::vector<double> cells);

  ImageShape shape() const noexcept { return shape_; }
  double at(int row, int col) const {
    return cells_[static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_.horizon) +
                  static_cast<std::size_t>(col)];
  }
  std::span<const double> cells() const noexcept { return cells_; }

  /// Version byte (1), magic "IMLM", u32 n_features, u32 horizon, then the
  /// cells as row-major little-endian f64.
  std::string serialize() const;
  static LatticeMemory deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static LatticeMemory load(const std::filesystem::path& path);

  friend bool operator==(const LatticeMemory&, const LatticeMemory&) = default;

private:
  ImageShape shape_;
  std::vector<double> cells_;
};

/// Throws ValidationError for an empty training set or mismatched inputs.
LatticeMemory lam_train(std::span<const BinaryImage> images, std::span<const double> labels);
LatticeMemory lam_train(std::span<const Trace> traces, ImageShape shape);

/// min over cells of Z'[i,j] + cells[i,j].
double lam_predict(const LatticeMemory& memory, const BinaryImage& image);

/// Indices of training traces with at least one event on a kernel of their
/// own cluster (cluster from assign_cluster with the model's level count).
std::vector<std::size_t> kernel_sample_indices(std::span<const Trace> traces,
                                               const ClusterModel& model);

/// lam_train over kernel_sample_indices(). Throws ValidationError when no
/// trace qualifies.
LatticeMemory kernel_lam_train(std::span<const Trace> traces, const ClusterModel& model);

struct ConstantSweep {
  /// grid[g] = g / (points - 1).
  std::vector<double> grid;
  /// mcae[g] = mean |xi_i - grid[g]|.
  std::vector<double> mcae;
  double best_mcae = 0.0;
  /// Smallest and largest grid value attaining best_mcae (within 1e-9).
  double best_low = 0.0;
  double best_high = 0.0;

  /// Grid value nearest the middle of [best_low, best_high].
  double best_constant() const;
};

/// Mean absolute error of every constant predictor on an even grid over
/// [0, 1]. Throws ValidationError for empty labels or fewer than 2 points.
ConstantSweep constant_sweep(std::span<const double> labels, int points = 10000);

}  // namespace imago
