#pragma once

// Candidate lattice data model: per-word-image candidate sets, sentences,
// pages, decisions and accuracy.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "candsel/bitmap.hpp"

namespace candsel {

using ImageId = std::uint32_t;

inline constexpr std::size_t kDefaultMaxCandidates = 10;

struct Candidate {
  std::string word;
  double score = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Ranked word hypotheses for one word image. Candidates are always sorted by
// score descending, ties broken lexicographically by word.
class CandidateSet {
 public:
  using Entry = std::pair<std::string, double>;

  CandidateSet(ImageId image_id, std::vector<Entry> entries,
               std::optional<std::string> truth = std::nullopt,
               std::size_t max_candidates = kDefaultMaxCandidates);

  ImageId image_id() const { return image_id_; }
  const std::optional<std::string>& truth() const { return truth_; }
  std::span<const Candidate> candidates() const { return candidates_; }
  std::size_t size() const { return candidates_.size(); }
  const Candidate& top1() const { return candidates_.front(); }
  const Candidate& operator[](std::size_t i) const { return candidates_[i]; }

  std::optional<std::size_t> find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word).has_value(); }
  double sum() const;

  // Replace scores (aligned with the current order) and re-sort. Values must
  // lie in [0,1].
  void set_scores(std::span<const double> scores);
  // Replace scores by non-negative weights divided by their sum, then
  // re-sort. Throws DegenerateInputError when every weight is zero.
  void reweight(std::span<const double> weights);
  // Divide scores by their sum.
  void normalize();
  // Keep only the candidates at the given indices (current order).
  void retain(std::span<const std::size_t> indices);

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;

 private:
  void sort();

  ImageId image_id_;
  std::vector<Candidate> candidates_;
  std::optional<std::string> truth_;
};

CandidateSet make_candidate_set(ImageId image_id,
                                std::vector<CandidateSet::Entry> entries,
                                std::optional<std::string> truth = std::nullopt,
                                std::size_t max_candidates = kDefaultMaxCandidates);

inline const Candidate& top1(const CandidateSet& set) { return set.top1(); }

CandidateSet normalize_scores(CandidateSet set);

struct SentenceLattice {
  std::vector<CandidateSet> positions;

  friend bool operator==(const SentenceLattice&, const SentenceLattice&) = default;
};

struct Page {
  std::vector<SentenceLattice> sentences;
  std::map<ImageId, Bitmap> bitmaps;

  std::size_t position_count() const;
  friend bool operator==(const Page&, const Page&) = default;
};

// Throws ValidationError on empty sentences, duplicate image ids or bitmaps
// for unknown ids.
void validate(const Page& page);

struct Location {
  std::size_t sentence = 0;
  std::size_t position = 0;
};

// image_id -> (sentence, position).
std::map<ImageId, Location> index_page(const Page& page);

using DecisionSequence = std::map<ImageId, std::string>;
using TruthMap = std::map<ImageId, std::string>;

DecisionSequence decide_page(const Page& page);

// Truth words of every position that records one.
TruthMap truth_of(const Page& page);

// True when the token holds a letter, a digit or a non-ASCII byte.
// Punctuation tokens are carried through pages but never scored.
bool is_word_token(std::string_view token);

// Truth of every position whose truth is a word token.
TruthMap word_truth_of(const Page& page);

// correct_rate over the word positions of the page.
double word_correct_rate(const Page& page);

// Fraction of positions whose decision equals the truth. Throws
// ValidationError if the two maps do not cover the same image ids.
double correct_rate(const DecisionSequence& decisions, const TruthMap& truth);

// Line-based interchange format:
//   image_id TAB truth TAB word:score,word:score,...
// one line per position, blank line between sentences, scores with six
// decimals. Bitmaps are not serialized.
void write_page(std::ostream& out, const Page& page);
Page read_page(std::istream& in,
               std::size_t max_candidates = kDefaultMaxCandidates);

}  // namespace candsel
