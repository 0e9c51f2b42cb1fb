#include "imago/binary_image.hpp"

#include <fmt/format.h>

#include "imago/errors.hpp"

namespace imago {

BinaryImage::BinaryImage(int rows, int cols)
    : rows_(rows), cols_(cols), words_per_row_((static_cast<std::size_t>(cols) + 63) / 64) {
  if (rows < 0 || cols < 0) {
    throw ValidationError(fmt::format("negative image extent {}x{}", rows, cols));
  }
  words_.assign(static_cast<std::size_t>(rows) * words_per_row_, 0);
}

std::size_t BinaryImage::popcount() const noexcept {
  std::size_t n = 0;
  for (const auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::size_t BinaryImage::distance(const BinaryImage& other) const {
  check_same_shape(other);
  std::size_t n = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    n += static_cast<std::size_t>(std::popcount(words_[i] ^ other.words_[i]));
  }
  return n;
}

bool BinaryImage::any() const noexcept {
  for (const auto w : words_) {
    if (w != 0) return true;
  }
  return false;
}

BinaryImage& BinaryImage::operator|=(const BinaryImage& other) {
  check_same_shape(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

BinaryImage& BinaryImage::operator&=(const BinaryImage& other) {
  check_same_shape(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
  return *this;
}

BinaryImage BinaryImage::operator~() const {
  BinaryImage out = *this;
  for (auto& w : out.words_) w = ~w;
  out.clear_padding();
  return out;
}

void BinaryImage::check_same_shape(const BinaryImage& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw ValidationError(fmt::format("image shape mismatch: {}x{} vs {}x{}", rows_, cols_,
                                      other.rows_, other.cols_));
  }
}

void BinaryImage::clear_padding() noexcept {
  const unsigned tail = static_cast<unsigned>(cols_) % 64;
  if (tail == 0 || words_per_row_ == 0) return;
  const std::uint64_t keep = (std::uint64_t{1} << tail) - 1;
  for (int r = 0; r < rows_; ++r) words_[index(r) + words_per_row_ - 1] &= keep;
}

}  // namespace imago
