#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace candsel {

// Binary word image, row-major, 1 = ink.
class Bitmap {
 public:
  Bitmap(int width, int height);
  Bitmap(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  // Out-of-range coordinates read as background.
  bool at_or_background(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_ && at(x, y);
  }
  void set(int x, int y, bool ink) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = ink ? 1 : 0;
  }

  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::size_t ink_count() const;

  friend bool operator==(const Bitmap&, const Bitmap&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

// Plain PBM (P1).
void write_pbm(std::ostream& out, const Bitmap& bitmap);
Bitmap read_pbm(std::istream& in);

}  // namespace candsel
