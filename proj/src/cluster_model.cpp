#include "imago/cluster_model.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "binio.hpp"
#include "imago/encoder.hpp"
#include "imago/errors.hpp"

namespace imago {

namespace {
constexpr std::uint8_t kModelVersion = 1;
constexpr std::string_view kModelMagic = "IMCM";
}  // namespace

ClusterModel::ClusterModel(ImageShape shape, int levels) : shape_(shape), levels_(levels) {
  shape.validate();
  if (levels < 1) throw ValidationError(fmt::format("levels must be >= 1, got {}", levels));
  const auto n = static_cast<std::size_t>(levels);
  ci_.assign(n, BinaryImage(shape));
  pi_.assign(n, std::vector<std::uint32_t>(shape.cells(), 0));
  cw_.assign(n, 0);
  cl_.assign(n, 0.0);
  pi_totals_.assign(n, 0);
}

std::size_t ClusterModel::slot(int cluster) const {
  if (cluster < 1 || cluster > levels_) {
    throw ValidationError(fmt::format("cluster {} outside [1,{}]", cluster, levels_));
  }
  return static_cast<std::size_t>(cluster - 1);
}

bool ClusterModel::ci_at(int row, int col) const {
  return ci_.at(static_cast<std::size_t>(col / shape_.horizon)).test(row, col % shape_.horizon);
}

BinaryImage ClusterModel::clustering_image() const {
  BinaryImage full(shape_.features, shape_.horizon * levels_);
  for (int c = 0; c < levels_; ++c) {
    ci_[static_cast<std::size_t>(c)].for_each_set(
        [&](int r, int t) { full.set(r, c * shape_.horizon + t); });
  }
  return full;
}

std::uint32_t ClusterModel::pi(int cluster, int row, int col) const {
  return pi_.at(slot(cluster)).at(static_cast<std::size_t>(row) *
                                      static_cast<std::size_t>(shape_.horizon) +
                                  static_cast<std::size_t>(col));
}

std::optional<double> ClusterModel::mean_label(int cluster) const {
  const auto w = weight(cluster);
  if (w == 0) return std::nullopt;
  return label_sum(cluster) / static_cast<double>(w);
}

std::uint64_t ClusterModel::training_size() const noexcept {
  std::uint64_t n = 0;
  for (const auto w : cw_) n += w;
  return n;
}

void ClusterModel::refresh_totals() {
  for (std::size_t c = 0; c < pi_.size(); ++c) {
    std::uint64_t total = 0;
    for (const auto v : pi_[c]) total += v;
    pi_totals_[c] = total;
  }
}

void ClusterModel::validate() const {
  const auto h = static_cast<std::size_t>(shape_.horizon);
  for (std::size_t c = 0; c < ci_.size(); ++c) {
    for (std::size_t cell = 0; cell < pi_[c].size(); ++cell) {
      const int r = static_cast<int>(cell / h);
      const int t = static_cast<int>(cell % h);
      const bool set = ci_[c].test(r, t);
      if ((pi_[c][cell] > 0) != set) {
        throw ValidationError(fmt::format("cluster {}: PI/CI disagree at ({},{})", c + 1, r + 1, t + 1));
      }
      if (pi_[c][cell] > cw_[c]) {
        throw ValidationError(fmt::format("cluster {}: PI exceeds CW at ({},{})", c + 1, r + 1, t + 1));
      }
    }
    if (!(cl_[c] >= 0.0 && cl_[c] <= static_cast<double>(cw_[c]))) {
      throw ValidationError(fmt::format("cluster {}: CL outside [0, CW]", c + 1));
    }
  }
}

ClusterModel train_cluster_model(std::span<const Trace> traces, ImageShape shape, int levels) {
  if (traces.empty()) throw ValidationError("train: empty training set");
  ClusterModel m(shape, levels);
  std::vector<std::vector<double>> labels(static_cast<std::size_t>(levels));
  const auto h = static_cast<std::size_t>(shape.horizon);
  for (const auto& t : traces) {
    const auto c = static_cast<std::size_t>(assign_cluster(t.label(), levels) - 1);
    ++m.cw_[c];
    labels[c].push_back(t.xi());
    for (const auto& e : t.events()) {
      if (!shape.contains(e)) {
        throw ValidationError(fmt::format("train: trace '{}' has event ({},{}) outside {}x{}",
                                          t.id(), e.feature, e.time, shape.features,
                                          shape.horizon));
      }
      m.ci_[c].set(e.feature - 1, e.time - 1);
      ++m.pi_[c][static_cast<std::size_t>(e.feature - 1) * h + static_cast<std::size_t>(e.time - 1)];
    }
  }
  for (std::size_t c = 0; c < labels.size(); ++c) {
    std::sort(labels[c].begin(), labels[c].end());
    double sum = 0.0;
    for (const double x : labels[c]) sum += x;
    m.cl_[c] = sum;
  }
  m.refresh_totals();
  return m;
}

namespace {

void require_nonempty(const ClusterModel& model) {
  if (model.training_size() == 0) throw ValidationError("classify: every cluster is empty");
}

void require_shape(const ClusterModel& model, const BinaryImage& image) {
  if (image.shape() != model.shape()) {
    throw ValidationError(fmt::format("classify: image is {}x{}, model expects {}x{}",
                                      image.rows(), image.cols(), model.shape().features,
                                      model.shape().horizon));
  }
}

// Probabilistic distance as the exact fraction numerator / CW:
//   sum_{Z=1} (1 - PI/CW) + sum_{Z=0} PI/CW
//     = (CW*|Z| + sum PI - 2 * sum_{Z=1} PI) / CW.
// The CI factor in the literal formula is redundant (PI > 0 implies CI = 1).
struct PaFraction {
  std::uint64_t numerator;
  std::uint64_t denominator;
};

PaFraction pa_fraction(const ClusterModel& model, int cluster, const BinaryImage& image,
                       std::uint64_t ones) {
  const auto pi = model.pi_slice(cluster);
  const auto h = static_cast<std::size_t>(model.shape().horizon);
  std::uint64_t hits = 0;
  image.for_each_set([&](int r, int c) {
    hits += pi[static_cast<std::size_t>(r) * h + static_cast<std::size_t>(c)];
  });
  const std::uint64_t w = model.weight(cluster);
  return {w * ones + model.pi_total(cluster) - 2 * hits, w};
}

__extension__ using Wide = unsigned __int128;

bool less(const PaFraction& a, const PaFraction& b) {
  return static_cast<Wide>(a.numerator) * b.denominator <
         static_cast<Wide>(b.numerator) * a.denominator;
}

}  // namespace

ClusterDecision classify_ca(const ClusterModel& model, const BinaryImage& image) {
  require_nonempty(model);
  require_shape(model, image);
  int best = 0;
  std::size_t best_distance = 0;
  for (int c = 1; c <= model.levels(); ++c) {
    if (model.weight(c) == 0) continue;
    const auto d = image.distance(model.ci_slice(c));
    if (best == 0 || d < best_distance) {
      best = c;
      best_distance = d;
    }
  }
  return {best, *model.mean_label(best), static_cast<double>(best_distance)};
}

ClusterDecision classify_pa(const ClusterModel& model, const BinaryImage& image) {
  require_nonempty(model);
  require_shape(model, image);
  const auto ones = static_cast<std::uint64_t>(image.popcount());
  int best = 0;
  PaFraction best_fraction{0, 1};
  for (int c = 1; c <= model.levels(); ++c) {
    if (model.weight(c) == 0) continue;
    const auto f = pa_fraction(model, c, image, ones);
    if (best == 0 || less(f, best_fraction)) {
      best = c;
      best_fraction = f;
    }
  }
  return {best, *model.mean_label(best),
          static_cast<double>(best_fraction.numerator) /
              static_cast<double>(best_fraction.denominator)};
}

std::vector<std::optional<double>> ca_distances(const ClusterModel& model,
                                                const BinaryImage& image) {
  require_shape(model, image);
  std::vector<std::optional<double>> out;
  for (int c = 1; c <= model.levels(); ++c) {
    if (model.weight(c) == 0) {
      out.emplace_back();
    } else {
      out.emplace_back(static_cast<double>(image.distance(model.ci_slice(c))));
    }
  }
  return out;
}

std::vector<std::optional<double>> pa_distances(const ClusterModel& model,
                                                const BinaryImage& image) {
  require_shape(model, image);
  const auto ones = static_cast<std::uint64_t>(image.popcount());
  std::vector<std::optional<double>> out;
  for (int c = 1; c <= model.levels(); ++c) {
    if (model.weight(c) == 0) {
      out.emplace_back();
    } else {
      const auto f = pa_fraction(model, c, image, ones);
      out.emplace_back(static_cast<double>(f.numerator) / static_cast<double>(f.denominator));
    }
  }
  return out;
}

std::vector<FeatureEvent> KernelSet::positions(int cluster) const {
  std::vector<FeatureEvent> out;
  masks.at(static_cast<std::size_t>(cluster - 1)).for_each_set([&](int r, int c) {
    out.push_back({r + 1, c + 1});
  });
  return out;
}

KernelSet kernels(const ClusterModel& model) {
  // once / twice: cells set in at least one / at least two slices.
  BinaryImage once(model.shape());
  BinaryImage twice(model.shape());
  for (const auto& s : model.ci_slices()) {
    BinaryImage overlap = once;
    overlap &= s;
    twice |= overlap;
    once |= s;
  }
  const BinaryImage unique_cells = [&] {
    BinaryImage u = ~twice;
    u &= once;
    return u;
  }();
  KernelSet ks;
  for (const auto& s : model.ci_slices()) {
    BinaryImage k = s;
    k &= unique_cells;
    ks.masks.push_back(std::move(k));
  }
  return ks;
}

void render_clustering_image(const ClusterModel& model, const std::filesystem::path& path) {
  write_pgm(model.clustering_image(), path);
}

std::string ClusterModel::serialize() const {
  std::string out;
  binio::put_u8(out, kModelVersion);
  out.append(kModelMagic);
  binio::put_u32(out, static_cast<std::uint32_t>(shape_.features));
  binio::put_u32(out, static_cast<std::uint32_t>(shape_.horizon));
  binio::put_u32(out, static_cast<std::uint32_t>(levels_));

  const int width = shape_.horizon * levels_;
  std::uint8_t byte = 0;
  int nbits = 0;
  for (int r = 0; r < shape_.features; ++r) {
    for (int col = 0; col < width; ++col) {
      if (ci_at(r, col)) byte |= static_cast<std::uint8_t>(1u << nbits);
      if (++nbits == 8) {
        binio::put_u8(out, byte);
        byte = 0;
        nbits = 0;
      }
    }
  }
  if (nbits > 0) binio::put_u8(out, byte);

  const auto h = static_cast<std::size_t>(shape_.horizon);
  for (int r = 0; r < shape_.features; ++r) {
    for (int col = 0; col < width; ++col) {
      const auto c = static_cast<std::size_t>(col) / h;
      binio::put_varint(out, pi_[c][static_cast<std::size_t>(r) * h + static_cast<std::size_t>(col) % h]);
    }
  }
  for (const auto w : cw_) binio::put_u64(out, w);
  for (const auto l : cl_) binio::put_f64(out, l);
  return out;
}

ClusterModel ClusterModel::deserialize(std::string_view bytes) {
  binio::Reader in(bytes, "cluster model");
  const auto version = in.u8();
  if (version != kModelVersion) in.fail(fmt::format("unsupported version {}", version));
  if (in.take(4) != kModelMagic) in.fail("bad magic");
  const auto features = in.u32();
  const auto horizon = in.u32();
  const auto levels = in.u32();
  constexpr std::uint32_t kMaxExtent = 1u << 20;
  if (features == 0 || horizon == 0 || levels == 0 || features > kMaxExtent ||
      horizon > kMaxExtent || levels > kMaxExtent) {
    in.fail("bad dimensions");
  }
  ClusterModel m({static_cast<int>(features), static_cast<int>(horizon)},
                 static_cast<int>(levels));
  const int width = static_cast<int>(horizon * levels);
  const std::size_t bits = static_cast<std::size_t>(features) * static_cast<std::size_t>(width);
  const auto bitmap = in.take((bits + 7) / 8);
  const auto h = static_cast<std::size_t>(horizon);
  std::size_t bit = 0;
  for (int r = 0; r < static_cast<int>(features); ++r) {
    for (int col = 0; col < width; ++col, ++bit) {
      if ((static_cast<unsigned char>(bitmap[bit / 8]) >> (bit % 8)) & 1u) {
        m.ci_[static_cast<std::size_t>(col) / h].set(r, col % static_cast<int>(horizon));
      }
    }
  }
  for (int r = 0; r < static_cast<int>(features); ++r) {
    for (int col = 0; col < width; ++col) {
      const auto v = in.varint();
      if (v > std::numeric_limits<std::uint32_t>::max()) in.fail("PI value too large");
      m.pi_[static_cast<std::size_t>(col) / h][static_cast<std::size_t>(r) * h + static_cast<std::size_t>(col) % h] =
          static_cast<std::uint32_t>(v);
    }
  }
  for (auto& w : m.cw_) w = in.u64();
  for (auto& l : m.cl_) l = in.f64();
  if (!in.done()) in.fail("trailing bytes");
  m.refresh_totals();
  m.validate();
  return m;
}

void ClusterModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  const auto bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

ClusterModel ClusterModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace imago
