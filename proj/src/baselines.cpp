#include "imago/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "binio.hpp"
#include "imago/encoder.hpp"
#include "imago/errors.hpp"
#include "imago/parallel.hpp"

namespace imago {

NeighborIndex::NeighborIndex(std::span<const Trace> traces, ImageShape shape)
    : shape_(shape), images_(encode_all(traces, shape)) {
  labels_.reserve(traces.size());
  for (const auto& t : traces) labels_.push_back(t.xi());
}

NeighborIndex::NeighborIndex(std::vector<BinaryImage> images, std::vector<double> labels)
    : images_(std::move(images)), labels_(std::move(labels)) {
  if (images_.size() != labels_.size()) throw ValidationError("index: images/labels size mismatch");
  if (!images_.empty()) shape_ = images_.front().shape();
  for (const auto& img : images_) {
    if (img.shape() != shape_) throw ValidationError("index: images differ in shape");
  }
}

NeighborMatch fnn_predict(const NeighborIndex& index, const BinaryImage& image, unsigned workers) {
  if (index.size() == 0) throw ValidationError("fnn: empty index");
  if (image.shape() != index.shape()) throw ValidationError("fnn: image shape mismatch");

  struct Best {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    std::size_t distance = std::numeric_limits<std::size_t>::max();
  };
  std::vector<Best> partial(chunk_count(index.size(), workers));
  parallel_chunks(index.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
    Best b;
    for (std::size_t k = begin; k < end; ++k) {
      const auto d = image.distance(index.image(k));
      if (d < b.distance) b = {k, d};
    }
    partial[chunk] = b;
  });
  // Chunks are in index order, so strict < keeps the earliest minimum.
  Best best;
  for (const auto& b : partial) {
    if (b.distance < best.distance) best = b;
  }
  return {best.index, best.distance, index.label(best.index)};
}

LatticeMemory::LatticeMemory(ImageShape shape, std::vector<double> cells)
    : shape_(shape), cells_(std::move(cells)) {
  shape.validate();
  if (cells_.size() != shape.cells()) throw ValidationError("lattice memory: cell count mismatch");
}

LatticeMemory lam_train(std::span<const BinaryImage> images, std::span<const double> labels) {
  if (images.empty()) throw ValidationError("lam: empty training set");
  if (images.size() != labels.size()) throw ValidationError("lam: images/labels size mismatch");
  const ImageShape shape = images.front().shape();
  for (const auto& img : images) {
    if (img.shape() != shape) throw ValidationError("lam: images differ in shape");
  }

  // xi - Z is xi where Z = 0 and xi - 1 where Z = 1. Since labels lie in
  // [0,1], any xi_k with a zero at (i,j) dominates every xi - 1, so the cell
  // is the largest label having a zero there, or max(xi) - 1 when every
  // image has a one there. Visiting images by descending label resolves
  // each cell at its first zero.
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] > labels[b]; });
  const double top = labels[order.front()];

  std::vector<double> cells(shape.cells(), top - 1.0);
  BinaryImage unresolved = ~BinaryImage(shape);
  const auto h = static_cast<std::size_t>(shape.horizon);
  for (const auto k : order) {
    BinaryImage fresh = ~images[k];
    fresh &= unresolved;
    fresh.for_each_set([&](int r, int c) {
      cells[static_cast<std::size_t>(r) * h + static_cast<std::size_t>(c)] = labels[k];
    });
    unresolved &= images[k];
    if (!unresolved.any()) break;
  }
  return LatticeMemory(shape, std::move(cells));
}

LatticeMemory lam_train(std::span<const Trace> traces, ImageShape shape) {
  const auto images = encode_all(traces, shape);
  std::vector<double> labels;
  labels.reserve(traces.size());
  for (const auto& t : traces) labels.push_back(t.xi());
  return lam_train(images, labels);
}

double lam_predict(const LatticeMemory& memory, const BinaryImage& image) {
  if (image.shape() != memory.shape()) throw ValidationError("lam: image shape mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      best = std::min(best, (image.test(r, c) ? 1.0 : 0.0) + memory.at(r, c));
    }
  }
  return best;
}

std::vector<std::size_t> kernel_sample_indices(std::span<const Trace> traces,
                                               const ClusterModel& model) {
  const auto ks = kernels(model);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const auto& t = traces[k];
    const auto& mask = ks.masks[static_cast<std::size_t>(assign_cluster(t.label(), model.levels()) - 1)];
    const bool hit = std::any_of(t.events().begin(), t.events().end(), [&](const FeatureEvent& e) {
      return model.shape().contains(e) && mask.test(e.feature - 1, e.time - 1);
    });
    if (hit) out.push_back(k);
  }
  return out;
}

LatticeMemory kernel_lam_train(std::span<const Trace> traces, const ClusterModel& model) {
  const auto keep = kernel_sample_indices(traces, model);
  if (keep.empty()) throw ValidationError("klam: no training sample contains a kernel of its cluster");
  std::vector<BinaryImage> images;
  std::vector<double> labels;
  images.reserve(keep.size());
  labels.reserve(keep.size());
  for (const auto k : keep) {
    images.push_back(encode(traces[k], model.shape()));
    labels.push_back(traces[k].xi());
  }
  return lam_train(images, labels);
}

ConstantSweep constant_sweep(std::span<const double> labels, int points) {
  if (labels.empty()) throw ValidationError("constant sweep: no labels");
  if (points < 2) throw ValidationError("constant sweep: need at least 2 grid points");

  std::vector<double> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  // prefix[i] = sum of the i smallest labels.
  std::vector<double> prefix(sorted.size() + 1, 0.0);
  for (std::size_t i = 0; i < sorted.size(); ++i) prefix[i + 1] = prefix[i] + sorted[i];
  const double n = static_cast<double>(sorted.size());
  const double total = prefix.back();

  ConstantSweep out;
  out.grid.reserve(static_cast<std::size_t>(points));
  out.mcae.reserve(static_cast<std::size_t>(points));
  for (int g = 0; g < points; ++g) {
    const double c = static_cast<double>(g) / static_cast<double>(points - 1);
    const auto below = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), c) - sorted.begin());
    const double nb = static_cast<double>(below);
    const double lower = c * nb - prefix[below];
    const double upper = (total - prefix[below]) - c * (n - nb);
    out.grid.push_back(c);
    out.mcae.push_back((lower + upper) / n);
  }

  out.best_mcae = *std::min_element(out.mcae.begin(), out.mcae.end());
  constexpr double kTol = 1e-9;
  bool found = false;
  for (std::size_t g = 0; g < out.grid.size(); ++g) {
    if (out.mcae[g] <= out.best_mcae + kTol) {
      if (!found) out.best_low = out.grid[g];
      out.best_high = out.grid[g];
      found = true;
    }
  }
  return out;
}

double ConstantSweep::best_constant() const {
  const double mid = 0.5 * (best_low + best_high);
  const double step = 1.0 / static_cast<double>(grid.size() - 1);
  return grid[static_cast<std::size_t>(std::llround(mid / step))];
}

std::string LatticeMemory::serialize() const {
  std::string out;
  binio::put_u8(out, 1);
  out.append("IMLM");
  binio::put_u32(out, static_cast<std::uint32_t>(shape_.features));
  binio::put_u32(out, static_cast<std::uint32_t>(shape_.horizon));
  for (const auto v : cells_) binio::put_f64(out, v);
  return out;
}

LatticeMemory LatticeMemory::deserialize(std::string_view bytes) {
  binio::Reader in(bytes, "lattice memory");
  const auto version = in.u8();
  if (version != 1) in.fail(fmt::format("unsupported version {}", version));
  if (in.take(4) != "IMLM") in.fail("bad magic");
  const auto features = in.u32();
  const auto horizon = in.u32();
  if (features == 0 || horizon == 0 || features > (1u << 20) || horizon > (1u << 20)) {
    in.fail("bad dimensions");
  }
  const ImageShape shape{static_cast<int>(features), static_cast<int>(horizon)};
  std::vector<double> cells(shape.cells());
  for (auto& v : cells) v = in.f64();
  if (!in.done()) in.fail("trailing bytes");
  return LatticeMemory(shape, std::move(cells));
}

void LatticeMemory::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  const auto bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

LatticeMemory LatticeMemory::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace imago
