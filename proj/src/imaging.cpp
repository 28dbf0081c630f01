#include "candsel/imaging.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdlib>
#include <stdexcept>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>

#include "candsel/errors.hpp"

namespace candsel {

namespace {

struct Glyph {
  char ch;
  std::array<const char*, kGlyphHeight> rows;
};

// clang-format off
constexpr Glyph kGlyphs[] = {
  {'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
  {'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
  {'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
  {'D', {"###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."}},
  {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
  {'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
  {'G', {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"}},
  {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
  {'I', {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
  {'J', {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
  {'K', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
  {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
  {'M', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
  {'N', {"#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"}},
  {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
  {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
  {'Q', {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"}},
  {'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
  {'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
  {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
  {'U', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
  {'V', {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
  {'W', {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."}},
  {'X', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
  {'Y', {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."}},
  {'Z', {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"}},
  {'a', {".....", ".....", ".###.", "....#", ".####", "#...#", ".####"}},
  {'b', {"#....", "#....", "#.##.", "##..#", "#...#", "#...#", "####."}},
  {'c', {".....", ".....", ".###.", "#....", "#....", "#...#", ".###."}},
  {'d', {"....#", "....#", ".##.#", "#..##", "#...#", "#...#", ".####"}},
  {'e', {".....", ".....", ".###.", "#...#", "#####", "#....", ".###."}},
  {'f', {"..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."}},
  {'g', {".....", ".####", "#...#", "#...#", ".####", "....#", ".###."}},
  {'h', {"#....", "#....", "#.##.", "##..#", "#...#", "#...#", "#...#"}},
  {'i', {"..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."}},
  {'j', {"...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."}},
  {'k', {"#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."}},
  {'l', {".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
  {'m', {".....", ".....", "##.#.", "#.#.#", "#.#.#", "#...#", "#...#"}},
  {'n', {".....", ".....", "#.##.", "##..#", "#...#", "#...#", "#...#"}},
  {'o', {".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."}},
  {'p', {".....", ".....", "####.", "#...#", "####.", "#....", "#...."}},
  {'q', {".....", ".....", ".##.#", "#..##", ".####", "....#", "....#"}},
  {'r', {".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."}},
  {'s', {".....", ".....", ".###.", "#....", ".###.", "....#", "####."}},
  {'t', {".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##."}},
  {'u', {".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"}},
  {'v', {".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
  {'w', {".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#."}},
  {'x', {".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"}},
  {'y', {".....", ".....", "#...#", "#...#", ".####", "....#", ".###."}},
  {'z', {".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"}},
  {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
  {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
  {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
  {'3', {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
  {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
  {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
  {'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
  {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
  {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
  {'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
  {'.', {".....", ".....", ".....", ".....", ".....", ".##..", ".##.."}},
  {',', {".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."}},
  {'!', {"..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#.."}},
  {'?', {".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#.."}},
  {';', {".....", ".##..", ".##..", ".....", ".##..", "..#..", ".#..."}},
  {':', {".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."}},
  {'\'', {".##..", "..#..", ".#...", ".....", ".....", ".....", "....."}},
  {'"', {".#.#.", ".#.#.", ".#.#.", ".....", ".....", ".....", "....."}},
  {'-', {".....", ".....", ".....", "#####", ".....", ".....", "....."}},
  {'(', {"...#.", "..#..", ".#...", ".#...", ".#...", "..#..", "...#."}},
  {')', {".#...", "..#..", "...#.", "...#.", "...#.", "..#..", ".#..."}},
};
// clang-format on

const Glyph* find_glyph(char c) {
  for (const auto& g : kGlyphs) {
    if (g.ch == c) return &g;
  }
  return nullptr;
}

// Row-packed image, each row placed at every horizontal pad in
// [0, 2*max_shift] so shifted comparisons reduce to XOR + popcount.
class PackedImage {
 public:
  PackedImage(const Bitmap& b, int max_shift)
      : width_(b.width()), height_(b.height()), pads_(2 * max_shift + 1),
        words_((b.width() + 2 * max_shift + 63) / 64) {
    data_.assign(static_cast<std::size_t>(pads_) * height_ * words_, 0);
    for (int pad = 0; pad < pads_; ++pad) {
      for (int y = 0; y < height_; ++y) {
        std::uint64_t* row = mutable_row(pad, y);
        for (int x = 0; x < width_; ++x) {
          if (b.at(x, y)) {
            int X = x + pad;
            row[X / 64] |= std::uint64_t{1} << (X % 64);
          }
        }
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int words() const { return words_; }
  const std::uint64_t* row(int pad, int y) const {
    return &data_[(static_cast<std::size_t>(pad) * height_ + y) * words_];
  }

 private:
  std::uint64_t* mutable_row(int pad, int y) {
    return &data_[(static_cast<std::size_t>(pad) * height_ + y) * words_];
  }

  int width_;
  int height_;
  int pads_;
  int words_;
  std::vector<std::uint64_t> data_;
};

double packed_similarity(const PackedImage& a, const PackedImage& b, int max_shift) {
  if (std::abs(a.width() - b.width()) > max_shift ||
      std::abs(a.height() - b.height()) > max_shift) {
    return 0.0;
  }
  const int words = std::max(a.words(), b.words());
  double best = 0.0;
  for (int dy = -max_shift; dy <= max_shift; ++dy) {
    const int y0 = std::min(0, dy);
    const int y1 = std::max(a.height(), dy + b.height());
    for (int dx = -max_shift; dx <= max_shift; ++dx) {
      const long area = static_cast<long>(std::max(a.width(), dx + b.width()) - std::min(0, dx)) *
                        (y1 - y0);
      long disagree = 0;
      for (int y = y0; y < y1; ++y) {
        const bool in_a = y >= 0 && y < a.height();
        const bool in_b = y - dy >= 0 && y - dy < b.height();
        const std::uint64_t* ra = in_a ? a.row(max_shift, y) : nullptr;
        const std::uint64_t* rb = in_b ? b.row(max_shift + dx, y - dy) : nullptr;
        for (int w = 0; w < words; ++w) {
          std::uint64_t va = ra && w < a.words() ? ra[w] : 0;
          std::uint64_t vb = rb && w < b.words() ? rb[w] : 0;
          disagree += std::popcount(va ^ vb);
        }
      }
      best = std::max(best, 1.0 - static_cast<double>(disagree) / static_cast<double>(area));
    }
  }
  return best;
}

// Agreement between the window of `a` starting at column ax and the window of
// `b` starting at column bx (both `width` wide, `a`'s height), with `b`
// shifted vertically by dy.
double window_agreement(const Bitmap& a, int ax, const Bitmap& b, int bx, int dy, int width) {
  long agree = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      if (a.at_or_background(ax + x, y) == b.at_or_background(bx + x, y + dy)) ++agree;
    }
  }
  return static_cast<double>(agree) / (static_cast<double>(width) * a.height());
}

}  // namespace

bool has_glyph(char c) { return find_glyph(c) != nullptr; }

Bitmap render_word(std::string_view word) {
  if (word.empty()) throw ValidationError("cannot render an empty word");
  std::vector<const Glyph*> glyphs;
  for (char c : word) {
    const Glyph* g = find_glyph(c);
    if (!g) {
      throw ValidationError("no glyph for character '" + std::string(1, c) + "' in '" +
                            std::string(word) + "'");
    }
    glyphs.push_back(g);
  }
  const int width = static_cast<int>(word.size()) * (kGlyphWidth + 1) - 1;
  Bitmap bitmap(width, kGlyphHeight);
  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    const int x0 = static_cast<int>(i) * (kGlyphWidth + 1);
    for (int y = 0; y < kGlyphHeight; ++y) {
      for (int x = 0; x < kGlyphWidth; ++x) {
        if (glyphs[i]->rows[y][x] == '#') bitmap.set(x0 + x, y, true);
      }
    }
  }
  return bitmap;
}

Bitmap add_noise(const Bitmap& bitmap, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("flip probability must be in [0,1]");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Bitmap out = bitmap;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (unit(rng) < p) out.set(x, y, !out.at(x, y));
    }
  }
  return out;
}

double similarity(const Bitmap& a, const Bitmap& b, int max_shift) {
  if (std::abs(a.width() - b.width()) > max_shift ||
      std::abs(a.height() - b.height()) > max_shift) {
    return 0.0;
  }
  return packed_similarity(PackedImage(a, max_shift), PackedImage(b, max_shift), max_shift);
}

SubimageMatch subimage_similarity(const Bitmap& small, const Bitmap& big, int max_shift) {
  if (small.width() > big.width() + 2 * max_shift ||
      small.height() > big.height() + 2 * max_shift) {
    throw ValidationError("sub-image is larger than the image it should fit in");
  }
  SubimageMatch best{{0, 0}, -1.0};
  for (int dy = -max_shift; dy <= big.height() - small.height() + max_shift; ++dy) {
    for (int dx = -max_shift; dx <= big.width() - small.width() + max_shift; ++dx) {
      double s = window_agreement(small, 0, big, dx, dy, small.width());
      if (s > best.score) best = {{dx, dy}, s};
    }
  }
  return best;
}

PartMatch match_parts(const Bitmap& a, Part pa, const Bitmap& b, Part pb, int min_width,
                      double threshold, int max_shift) {
  const int widest = std::min(a.width(), b.width());
  for (int w = widest; w >= std::max(1, min_width); --w) {
    const int ax = pa == Part::Left ? 0 : a.width() - w;
    const int bx = pb == Part::Left ? 0 : b.width() - w;
    PartMatch best{w, {0, 0}, -1.0};
    for (int dy = -max_shift; dy <= max_shift; ++dy) {
      for (int dx = -max_shift; dx <= max_shift; ++dx) {
        double s = window_agreement(a, ax, b, bx + dx, dy, w);
        if (s > best.score) best = {w, {dx, dy}, s};
      }
    }
    if (best.score >= threshold) return best;
  }
  return {};
}

RelationThresholds RelationThresholds::type1_only(double type1) {
  RelationThresholds t;
  t.type1 = type1;
  for (int i = 2; i <= 5; ++i) t.enabled[i] = false;
  return t;
}

namespace {

struct PartCandidate {
  int width = 0;
  int type = 0;
  bool reversed = false;  // type 5: b's right part matches a's left part
  PartMatch match;
};

}  // namespace

RelationGraph detect_relations(const std::map<ImageId, Bitmap>& bitmaps,
                               const RelationThresholds& t) {
  RelationGraph graph;
  std::vector<ImageId> ids;
  std::vector<const Bitmap*> images;
  std::vector<PackedImage> packed;
  std::vector<long> ink;
  for (const auto& [id, bitmap] : bitmaps) {
    ids.push_back(id);
    images.push_back(&bitmap);
    packed.emplace_back(bitmap, t.max_shift);
    ink.push_back(static_cast<long>(bitmap.ink_count()));
  }
  graph.nodes = ids;
  const bool any_partial = t.enabled[2] || t.enabled[3] || t.enabled[4] || t.enabled[5];

  // Sort by width so the type-1 prefilter bounds the inner loop.
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return images[x]->width() < images[y]->width();
  });

  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      std::size_t i = order[oi];
      std::size_t j = order[oj];
      if (i > j) std::swap(i, j);
      const Bitmap& a = *images[i];
      const Bitmap& b = *images[j];
      const int width_gap = std::abs(a.width() - b.width());
      if (!any_partial && width_gap > t.type1_width_prefilter) break;

      // Shifts keep every ink pixel inside the union box, so the ink count
      // difference bounds the disagreement from below.
      const long union_area =
          static_cast<long>(std::max(a.width(), b.width()) + t.max_shift) *
          (std::max(a.height(), b.height()) + t.max_shift);
      const double ink_bound =
          1.0 - static_cast<double>(std::abs(ink[i] - ink[j])) / static_cast<double>(union_area);
      if (t.enabled[1] && width_gap <= t.type1_width_prefilter &&
          ink_bound >= t.type1 - 1e-12) {
        double s = packed_similarity(packed[i], packed[j], t.max_shift);
        if (s >= t.type1) {
          graph.edges.push_back({ids[i], ids[j], 1, s, {0, 0}});
          continue;
        }
      }
      if (t.enabled[2] && width_gap > t.max_shift) {
        bool a_small = a.width() < b.width();
        const Bitmap& small = a_small ? a : b;
        const Bitmap& big = a_small ? b : a;
        if (small.width() >= t.min_part_width &&
            small.height() <= big.height() + 2 * t.max_shift) {
          SubimageMatch m = subimage_similarity(small, big, t.max_shift);
          if (m.score >= t.subimage) {
            graph.edges.push_back({a_small ? ids[i] : ids[j], a_small ? ids[j] : ids[i], 2,
                                   m.score, m.offset});
            continue;
          }
        }
      }
      PartCandidate best;
      auto consider = [&](int type, bool reversed, const PartMatch& m) {
        if (m.width > best.width) best = {m.width, type, reversed, m};
      };
      if (t.enabled[3]) {
        consider(3, false, match_parts(a, Part::Left, b, Part::Left, t.min_part_width, t.part,
                                       t.max_shift));
      }
      if (t.enabled[4]) {
        consider(4, false, match_parts(a, Part::Right, b, Part::Right, t.min_part_width,
                                       t.part, t.max_shift));
      }
      if (t.enabled[5]) {
        consider(5, false, match_parts(a, Part::Right, b, Part::Left, t.min_part_width, t.part,
                                       t.max_shift));
        consider(5, true, match_parts(b, Part::Right, a, Part::Left, t.min_part_width, t.part,
                                      t.max_shift));
      }
      if (best.width > 0) {
        ImageId from = best.reversed ? ids[j] : ids[i];
        ImageId to = best.reversed ? ids[i] : ids[j];
        graph.edges.push_back({from, to, best.type, best.match.score, best.match.offset});
      }
    }
  }
  std::sort(graph.edges.begin(), graph.edges.end(), [](const auto& x, const auto& y) {
    return std::tie(x.a, x.b, x.type) < std::tie(y.a, y.b, y.type);
  });
  graph.type1_clusters = cluster_type1(graph);
  return graph;
}

std::vector<Cluster> cluster_type1(const RelationGraph& graph) {
  std::set<ImageId> node_set(graph.nodes.begin(), graph.nodes.end());
  for (const auto& e : graph.edges) {
    node_set.insert(e.a);
    node_set.insert(e.b);
  }
  std::vector<ImageId> nodes(node_set.begin(), node_set.end());
  std::unordered_map<ImageId, std::size_t> slot;
  for (std::size_t i = 0; i < nodes.size(); ++i) slot.emplace(nodes[i], i);

  std::vector<std::vector<std::size_t>> adjacent(nodes.size());
  for (const auto& e : graph.edges) {
    if (e.type != 1 || e.a == e.b) continue;
    std::size_t a = slot.at(e.a);
    std::size_t b = slot.at(e.b);
    adjacent[a].push_back(b);
    adjacent[b].push_back(a);
  }
  for (auto& adj : adjacent) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }

  std::vector<Cluster> clusters;
  std::vector<bool> assigned(nodes.size(), false);
  // hits[v]: number of current cluster members adjacent to v.
  std::vector<std::size_t> hits(nodes.size(), 0);
  std::vector<std::size_t> touched;
  for (std::size_t u = 0; u < nodes.size(); ++u) {
    if (assigned[u]) continue;
    std::vector<std::size_t> members{u};
    assigned[u] = true;
    auto add_hits = [&](std::size_t m) {
      for (std::size_t w : adjacent[m]) {
        if (hits[w]++ == 0) touched.push_back(w);
      }
    };
    add_hits(u);
    for (std::size_t v : adjacent[u]) {
      if (assigned[v] || hits[v] != members.size()) continue;
      members.push_back(v);
      assigned[v] = true;
      add_hits(v);
    }
    for (std::size_t w : touched) hits[w] = 0;
    touched.clear();
    Cluster cluster;
    for (std::size_t m : members) cluster.push_back(nodes[m]);
    clusters.push_back(std::move(cluster));
  }
  return clusters;
}

void write_relations(std::ostream& out, const RelationGraph& graph) {
  char score[32];
  for (const auto& e : graph.edges) {
    std::snprintf(score, sizeof score, "%.6f", e.score);
    out << e.a << '\t' << e.b << '\t' << e.type << '\t' << score << '\t' << e.offset.dx << '\t'
        << e.offset.dy << '\n';
  }
}

RelationGraph read_relations(std::istream& in) {
  RelationGraph graph;
  std::set<ImageId> nodes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      f.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 6) throw ParseError("expected 'a TAB b TAB type TAB score TAB dx TAB dy'", line_no);
    RelationEdge e;
    try {
      std::size_t used = 0;
      auto whole = [&](const std::string& s) {
        if (used != s.size()) throw std::invalid_argument(s);
      };
      e.a = static_cast<ImageId>(std::stoul(f[0], &used)); whole(f[0]);
      e.b = static_cast<ImageId>(std::stoul(f[1], &used)); whole(f[1]);
      e.type = std::stoi(f[2], &used); whole(f[2]);
      e.score = std::stod(f[3], &used); whole(f[3]);
      e.offset.dx = std::stoi(f[4], &used); whole(f[4]);
      e.offset.dy = std::stoi(f[5], &used); whole(f[5]);
    } catch (const std::exception&) {
      throw ParseError("bad relation field", line_no);
    }
    if (e.type < 1 || e.type > 5) throw ParseError("relation type must be 1..5", line_no);
    if (!(e.score >= 0.0 && e.score <= 1.0)) throw ParseError("score outside [0,1]", line_no);
    nodes.insert(e.a);
    nodes.insert(e.b);
    graph.edges.push_back(e);
  }
  std::sort(graph.edges.begin(), graph.edges.end(), [](const auto& x, const auto& y) {
    return std::tie(x.a, x.b, x.type) < std::tie(y.a, y.b, y.type);
  });
  graph.nodes.assign(nodes.begin(), nodes.end());
  graph.type1_clusters = cluster_type1(graph);
  return graph;
}

}  // namespace candsel
