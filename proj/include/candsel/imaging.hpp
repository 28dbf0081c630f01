#pragma once

// Synthetic word images and visual inter-word relations.
//
// Relation types between word images W1 and W2:
//   1  W1 ~ W2                              (same word)
//   2  W1 ~ sub-image of W2                 (W1 is a substring of W2)
//   3  left part of W1 ~ left part of W2    (shared prefix)
//   4  right part of W1 ~ right part of W2  (shared suffix)
//   5  right part of W1 ~ left part of W2   (suffix of W1 = prefix of W2)

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string_view>
#include <vector>

#include "candsel/bitmap.hpp"
#include "candsel/degrade.hpp"
#include "candsel/lattice.hpp"

namespace candsel {

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

bool has_glyph(char c);

// Fixed 5x7 glyphs with a one-pixel gap: width = 6*len - 1, height = 7.
Bitmap render_word(std::string_view word);

// Flips each pixel independently with probability p.
Bitmap add_noise(const Bitmap& bitmap, double p, Rng& rng);

inline constexpr int kDefaultMaxShift = 2;

// Best fraction of agreeing pixels over the bounding box of both images,
// maximised over relative shifts in [-max_shift, max_shift]^2; pixels outside
// an image count as background. 0 when the sizes differ by more than
// max_shift along either axis.
double similarity(const Bitmap& a, const Bitmap& b, int max_shift = kDefaultMaxShift);

struct Offset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

struct SubimageMatch {
  Offset offset;
  double score = 0.0;
};

// Slides `small` over `big` (with max_shift slack on every side) and returns
// the offset with the largest fraction of agreeing pixels inside the small
// window. Throws ValidationError when small cannot fit inside big.
SubimageMatch subimage_similarity(const Bitmap& small, const Bitmap& big,
                                  int max_shift = kDefaultMaxShift);

enum class Part { Left, Right };

struct PartMatch {
  int width = 0;  // 0: no part of at least min_width cleared the threshold
  Offset offset;
  double score = 0.0;
};

// Widest w in [min_width, min(widths)] such that the w-column part `pa` of
// `a` matches part `pb` of `b` with agreement >= threshold (over shifts).
PartMatch match_parts(const Bitmap& a, Part pa, const Bitmap& b, Part pb, int min_width,
                      double threshold, int max_shift = kDefaultMaxShift);

struct RelationThresholds {
  double type1 = 0.95;      // 0.85 for noisy images
  double subimage = 0.9;
  double part = 0.9;
  int min_part_width = 11;  // two glyphs
  int max_shift = kDefaultMaxShift;
  int type1_width_prefilter = 4;
  bool enabled[6] = {false, true, true, true, true, true};  // index = type

  static RelationThresholds type1_only(double type1);
};

struct RelationEdge {
  ImageId a = 0;
  ImageId b = 0;
  int type = 1;
  double score = 0.0;
  Offset offset;

  friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
};

using Cluster = std::vector<ImageId>;

struct RelationGraph {
  std::vector<ImageId> nodes;  // sorted
  std::vector<RelationEdge> edges;  // sorted by (a, b, type)
  std::vector<Cluster> type1_clusters;
};

// Compares every unordered pair and keeps the highest-priority relation that
// clears its threshold (1 > 2 > 3/4/5). Type-2 edges point from the
// sub-image to the containing image; type-5 edges from the image whose right
// part matches to the image whose left part matches; otherwise a < b.
// Type-1 clusters are filled in.
RelationGraph detect_relations(const std::map<ImageId, Bitmap>& bitmaps,
                               const RelationThresholds& thresholds);

// Greedy complete-linkage clustering in image-id order: every pair inside a
// cluster is joined by a type-1 edge. Every node lands in exactly one cluster.
std::vector<Cluster> cluster_type1(const RelationGraph& graph);

// Text dump, one edge per line: a TAB b TAB type TAB score TAB dx TAB dy.
void write_relations(std::ostream& out, const RelationGraph& graph);
RelationGraph read_relations(std::istream& in);

}  // namespace candsel
