#include "imago/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "imago/errors.hpp"

namespace imago {

BinaryImage encode(const Trace& trace, ImageShape shape) {
  BinaryImage z(shape);
  for (const auto& e : trace.events()) {
    if (!shape.contains(e)) {
      throw ValidationError(fmt::format("trace '{}': event ({},{}) outside {}x{}", trace.id(),
                                        e.feature, e.time, shape.features, shape.horizon));
    }
    z.set(e.feature - 1, e.time - 1);
  }
  return z;
}

std::vector<BinaryImage> encode_all(std::span<const Trace> traces, ImageShape shape) {
  std::vector<BinaryImage> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(encode(t, shape));
  return out;
}

std::vector<std::uint8_t> flatten_static(const Trace& trace, ImageShape shape) {
  std::vector<std::uint8_t> v(static_cast<std::size_t>(shape.features), 0);
  for (const auto& e : trace.events()) {
    if (!shape.contains(e)) {
      throw ValidationError(fmt::format("trace '{}': event ({},{}) outside shape", trace.id(),
                                        e.feature, e.time));
    }
    v[static_cast<std::size_t>(e.feature - 1)] = 1;
  }
  return v;
}

std::vector<std::uint8_t> flatten_static(const BinaryImage& image) {
  std::vector<std::uint8_t> v(static_cast<std::size_t>(image.rows()), 0);
  for (int r = 0; r < image.rows(); ++r) {
    const auto row = image.row_words(r);
    v[static_cast<std::size_t>(r)] =
        std::any_of(row.begin(), row.end(), [](std::uint64_t w) { return w != 0; }) ? 1 : 0;
  }
  return v;
}

ImageShape ReductionMask::reduced_shape() const {
  return {full_shape.features - static_cast<int>(dead_features.size()),
          full_shape.horizon - static_cast<int>(dead_times.size())};
}

ReductionMask compute_reduction_mask(std::span<const BinaryImage> ci_slices) {
  if (ci_slices.empty()) throw ValidationError("reduction mask needs at least one slice");
  const ImageShape shape = ci_slices.front().shape();
  BinaryImage used(shape);
  for (const auto& s : ci_slices) used |= s;

  ReductionMask mask{shape, {}, {}};
  std::vector<bool> time_live(static_cast<std::size_t>(shape.horizon), false);
  std::vector<bool> row_live(static_cast<std::size_t>(shape.features), false);
  used.for_each_set([&](int r, int c) {
    row_live[static_cast<std::size_t>(r)] = true;
    time_live[static_cast<std::size_t>(c)] = true;
  });
  for (int r = 0; r < shape.features; ++r) {
    if (!row_live[static_cast<std::size_t>(r)]) mask.dead_features.push_back(r + 1);
  }
  for (int c = 0; c < shape.horizon; ++c) {
    if (!time_live[static_cast<std::size_t>(c)]) mask.dead_times.push_back(c + 1);
  }
  return mask;
}

namespace {

// new_index[i] is the 0-based position of old 0-based index i, or -1 if dead.
std::vector<int> survivor_map(int extent, const std::vector<int>& dead) {
  std::vector<int> map(static_cast<std::size_t>(extent), 0);
  for (const int d : dead) map[static_cast<std::size_t>(d - 1)] = -1;
  int next = 0;
  for (auto& m : map) {
    if (m == 0) m = next++;
  }
  return map;
}

void check_reducible(const ReductionMask& mask) {
  const auto reduced = mask.reduced_shape();
  if (reduced.features <= 0 || reduced.horizon <= 0) {
    throw ValidationError("reduction removes every feature or every time step");
  }
}

}  // namespace

BinaryImage apply_reduction(const BinaryImage& image, const ReductionMask& mask) {
  if (image.shape() != mask.full_shape) {
    throw ValidationError("image shape does not match reduction mask");
  }
  check_reducible(mask);
  const auto rows = survivor_map(mask.full_shape.features, mask.dead_features);
  const auto cols = survivor_map(mask.full_shape.horizon, mask.dead_times);
  BinaryImage out(mask.reduced_shape());
  image.for_each_set([&](int r, int c) {
    const int nr = rows[static_cast<std::size_t>(r)];
    const int nc = cols[static_cast<std::size_t>(c)];
    if (nr >= 0 && nc >= 0) out.set(nr, nc);
  });
  return out;
}

Trace reduce_trace(const Trace& trace, const ReductionMask& mask) {
  check_reducible(mask);
  const auto rows = survivor_map(mask.full_shape.features, mask.dead_features);
  const auto cols = survivor_map(mask.full_shape.horizon, mask.dead_times);
  std::vector<FeatureEvent> kept;
  for (const auto& e : trace.events()) {
    if (!mask.full_shape.contains(e)) {
      throw ValidationError(fmt::format("trace '{}': event outside mask shape", trace.id()));
    }
    const int nr = rows[static_cast<std::size_t>(e.feature - 1)];
    const int nc = cols[static_cast<std::size_t>(e.time - 1)];
    if (nr >= 0 && nc >= 0) kept.push_back({nr + 1, nc + 1});
  }
  return Trace(trace.id(), trace.label(), std::move(kept));
}

std::string to_pgm(const BinaryImage& image) {
  std::string out = fmt::format("P5\n{} {}\n255\n", image.cols(), image.rows());
  const std::size_t header = out.size();
  out.resize(header + image.cells(), '\0');
  image.for_each_set([&](int r, int c) {
    out[header + static_cast<std::size_t>(r) * static_cast<std::size_t>(image.cols()) +
        static_cast<std::size_t>(c)] = static_cast<char>(255);
  });
  return out;
}

BinaryImage from_pgm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (!in || magic != "P5" || width <= 0 || height <= 0 || maxval != 255) {
    throw ValidationError("not a binary P5 PGM with maxval 255");
  }
  in.get();  // single whitespace before the raster
  const auto offset = static_cast<std::size_t>(in.tellg());
  const std::size_t cells = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() != offset + cells) throw ValidationError("PGM raster size mismatch");
  BinaryImage img(height, width);
  for (std::size_t i = 0; i < cells; ++i) {
    const auto v = static_cast<unsigned char>(bytes[offset + i]);
    if (v != 0 && v != 255) throw ValidationError("PGM pixel is neither 0 nor 255");
    if (v == 255) {
      img.set(static_cast<int>(i / static_cast<std::size_t>(width)),
              static_cast<int>(i % static_cast<std::size_t>(width)));
    }
  }
  return img;
}

void write_pgm(const BinaryImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  const auto bytes = to_pgm(image);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

BinaryImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_pgm(bytes);
}

namespace {

void check_file_safe_id(const std::string& id) {
  if (id.empty() || id == "." || id == ".." ||
      id.find_first_of("/\\") != std::string::npos || id.find('\0') != std::string::npos) {
    throw ValidationError(fmt::format("id '{}' cannot be used as a file name", id));
  }
}

}  // namespace

std::string export_images(const Dataset& dataset, const std::filesystem::path& out_dir,
                          const ExportOptions& options) {
  namespace fs = std::filesystem;
  if (options.levels < 1) throw ValidationError("export: levels must be >= 1");
  if (options.mask && options.mask->full_shape != dataset.shape) {
    throw ValidationError("export: reduction mask shape does not match dataset");
  }
  std::unordered_set<std::string> seen;
  for (const auto& t : dataset.traces) {
    check_file_safe_id(t.id());
    if (!seen.insert(t.id()).second) {
      throw ValidationError(fmt::format("export: id collision '{}'", t.id()));
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));
  for (int c = 1; c <= options.levels; ++c) {
    fs::create_directories(out_dir / std::to_string(c), ec);
    if (ec) throw IoError(fmt::format("cannot create cluster folder {}: {}", c, ec.message()));
  }

  const ImageShape image_shape = options.mask ? options.mask->reduced_shape() : dataset.shape;
  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["levels"] = options.levels;
  manifest["n_features"] = image_shape.features;
  manifest["horizon"] = image_shape.horizon;
  manifest["reduced"] = options.mask.has_value();
  auto means = nlohmann::ordered_json::array();
  for (int c = 1; c <= options.levels; ++c) {
    const auto idx = static_cast<std::size_t>(c - 1);
    if (idx < options.cluster_means.size() && options.cluster_means[idx]) {
      means.push_back(*options.cluster_means[idx]);
    } else {
      means.push_back(nullptr);
    }
  }
  manifest["cluster_means"] = std::move(means);

  // Images keyed by id in sorted order so the manifest is independent of
  // dataset order.
  std::vector<const Trace*> order;
  for (const auto& t : dataset.traces) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const Trace* a, const Trace* b) { return a->id() < b->id(); });
  auto images = nlohmann::ordered_json::object();
  for (const Trace* tp : order) {
    const Trace& t = *tp;
    const int tc = assign_cluster(t.label(), options.levels);
    const std::string rel = fmt::format("{}/{}.pgm", tc, t.id());
    auto image = encode(t, dataset.shape);
    if (options.mask) image = apply_reduction(image, *options.mask);
    write_pgm(image, out_dir / rel);
    images[t.id()] = {{"path", rel}, {"tc", tc}, {"xi", t.xi()}};
  }
  manifest["images"] = std::move(images);

  const std::string text = manifest.dump(2) + "\n";
  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write manifest.json");
  out << text;
  return text;
}

}  // namespace imago
