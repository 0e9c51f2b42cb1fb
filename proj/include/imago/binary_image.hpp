#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imago/trace.hpp"

namespace imago {

/// Dense 0/1 matrix with each row packed into 64-bit words.
///
/// Row and column indices are 0-based here; trace events are 1-based and
/// get shifted by encode(). Padding bits past cols() are always zero, so
/// whole-word operations never see stray ones.
class BinaryImage {
public:
  BinaryImage() = default;
  BinaryImage(int rows, int cols);
  explicit BinaryImage(ImageShape shape) : BinaryImage(shape.features, shape.horizon) {}

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  ImageShape shape() const noexcept { return {rows_, cols_}; }
  std::size_t cells() const noexcept {
    return static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_);
  }
  std::size_t words_per_row() const noexcept { return words_per_row_; }

  bool test(int row, int col) const noexcept {
    const auto w = words_[index(row) + static_cast<std::size_t>(col) / 64];
    return (w >> (static_cast<unsigned>(col) % 64)) & 1u;
  }
  void set(int row, int col, bool value = true) noexcept {
    auto& w = words_[index(row) + static_cast<std::size_t>(col) / 64];
    const std::uint64_t bit = std::uint64_t{1} << (static_cast<unsigned>(col) % 64);
    w = value ? (w | bit) : (w & ~bit);
  }

  std::span<const std::uint64_t> row_words(int row) const noexcept {
    return {words_.data() + index(row), words_per_row_};
  }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  std::size_t popcount() const noexcept;

  /// Sum over cells of |a - b|, computed as popcount(a XOR b).
  /// Shapes must match.
  std::size_t distance(const BinaryImage& other) const;

  bool any() const noexcept;

  /// Sets every cell that is set in `other` (shapes must match).
  BinaryImage& operator|=(const BinaryImage& other);
  BinaryImage& operator&=(const BinaryImage& other);
  /// Complement, keeping padding bits zero.
  BinaryImage operator~() const;

  /// Calls f(row, col) for each set cell in row-major order.
  template <class F>
  void for_each_set(F&& f) const {
    for (int r = 0; r < rows_; ++r) {
      const auto* row = words_.data() + index(r);
      for (std::size_t w = 0; w < words_per_row_; ++w) {
        std::uint64_t bits = row[w];
        while (bits != 0) {
          const int col = static_cast<int>(w * 64) + std::countr_zero(bits);
          f(r, col);
          bits &= bits - 1;
        }
      }
    }
  }

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

private:
  std::size_t index(int row) const noexcept {
    return static_cast<std::size_t>(row) * words_per_row_;
  }
  void check_same_shape(const BinaryImage& other) const;
  void clear_padding() noexcept;

  int rows_ = 0;
  int cols_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace imago
