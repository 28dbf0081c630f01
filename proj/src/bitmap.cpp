#include "candsel/bitmap.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <string>

#include "candsel/errors.hpp"

namespace candsel {

Bitmap::Bitmap(int width, int height)
    : Bitmap(width, height,
             std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                       static_cast<std::size_t>(std::max(height, 0)))) {}

Bitmap::Bitmap(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 1 || height < 1) throw ValidationError("bitmap dimensions must be >= 1");
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ValidationError("bitmap size does not match its dimensions");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t Bitmap::ink_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

void write_pbm(std::ostream& out, const Bitmap& bitmap) {
  out << "P1\n" << bitmap.width() << ' ' << bitmap.height() << '\n';
  for (int y = 0; y < bitmap.height(); ++y) {
    for (int x = 0; x < bitmap.width(); ++x) {
      if (x) out << ' ';
      out << (bitmap.at(x, y) ? '1' : '0');
    }
    out << '\n';
  }
}

namespace {

// Next whitespace-separated token, skipping '#' comments to end of line.
bool next_token(std::istream& in, std::string& token) {
  token.clear();
  char c;
  while (in.get(c)) {
    if (c == '#') {
      while (in.get(c) && c != '\n') {
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) return true;
      continue;
    }
    token.push_back(c);
  }
  return !token.empty();
}

}  // namespace

Bitmap read_pbm(std::istream& in) {
  std::string token;
  if (!next_token(in, token) || token != "P1") throw IoError("not a plain PBM (P1) image");
  int dims[2];
  for (int& d : dims) {
    if (!next_token(in, token)) throw IoError("truncated PBM header");
    try {
      d = std::stoi(token);
    } catch (const std::exception&) {
      throw IoError("bad PBM dimension '" + token + "'");
    }
  }
  if (dims[0] < 1 || dims[1] < 1) throw IoError("bad PBM dimensions");
  std::vector<std::uint8_t> bits;
  bits.reserve(static_cast<std::size_t>(dims[0]) * dims[1]);
  // Pixels may be packed without separators.
  while (bits.size() < static_cast<std::size_t>(dims[0]) * dims[1] && next_token(in, token)) {
    for (char c : token) {
      if (c != '0' && c != '1') throw IoError("bad PBM pixel '" + std::string(1, c) + "'");
      bits.push_back(c == '1');
    }
  }
  if (bits.size() != static_cast<std::size_t>(dims[0]) * dims[1]) {
    throw IoError("PBM pixel count does not match its header");
  }
  return Bitmap(dims[0], dims[1], std::move(bits));
}

}  // namespace candsel
