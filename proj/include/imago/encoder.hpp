#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imago/binary_image.hpp"
#include "imago/dataset.hpp"
#include "imago/trace.hpp"

namespace imago {

/// Binary image of a trace: cell (feature-1, time-1) is set for each event.
/// Throws ValidationError for events outside `shape`.
BinaryImage encode(const Trace& trace, ImageShape shape);

std::vector<BinaryImage> encode_all(std::span<const Trace> traces, ImageShape shape);

/// Static feature vector: component f-1 is 1 iff feature f occurs at any time.
std::vector<std::uint8_t> flatten_static(const Trace& trace, ImageShape shape);
/// Row-wise OR of an image.
std::vector<std::uint8_t> flatten_static(const BinaryImage& image);

/// Feature rows and time columns that are zero in every cluster slice.
/// Indices are 1-based and sorted.
struct ReductionMask {
  ImageShape full_shape;
  std::vector<int> dead_features;
  std::vector<int> dead_times;

  ImageShape reduced_shape() const;
  bool empty() const noexcept { return dead_features.empty() && dead_times.empty(); }

  friend bool operator==(const ReductionMask&, const ReductionMask&) = default;
};

/// Computed from the clustering image, given as its per-cluster slices.
ReductionMask compute_reduction_mask(std::span<const BinaryImage> ci_slices);

/// Drops dead rows and columns. Throws ValidationError if the image does not
/// have the mask's full shape or nothing would remain.
BinaryImage apply_reduction(const BinaryImage& image, const ReductionMask& mask);

/// Drops events on dead rows/columns and renumbers the survivors so that
/// encode(reduce_trace(t), reduced) == apply_reduction(encode(t, full)).
Trace reduce_trace(const Trace& trace, const ReductionMask& mask);

/// Binary PGM (P5, maxval 255): 255 for a set cell, 0 otherwise,
/// width = cols, height = rows.
std::string to_pgm(const BinaryImage& image);
BinaryImage from_pgm(const std::string& bytes);
void write_pgm(const BinaryImage& image, const std::filesystem::path& path);
BinaryImage read_pgm(const std::filesystem::path& path);

struct ExportOptions {
  int levels = 10;
  /// Applied to every exported image when present.
  std::optional<ReductionMask> mask;
  /// Mean training label per cluster (index c-1), from a trained model.
  /// Written into the manifest; null entries mean "unknown/empty cluster".
  std::vector<std::optional<double>> cluster_means;
};

/// Writes out_dir/<TC>/<id>.pgm for every trace and out_dir/manifest.json.
/// Returns the manifest text. Ids must be unique and usable as file names.
std::string export_images(const Dataset& dataset, const std::filesystem::path& out_dir,
                          const ExportOptions& options);

}  // namespace imago
