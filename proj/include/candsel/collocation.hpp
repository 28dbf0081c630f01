#pragma once

// Word collocation statistics: corpus tokenization, distance-indexed pair
// counts and mutual-information scoring.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace candsel {

using Sentence = std::vector<std::string>;
using Corpus = std::vector<Sentence>;

// Whitespace-delimited tokens; every ASCII punctuation character becomes a
// token of its own. Case is preserved.
std::vector<std::string> tokenize(std::string_view text);

// As tokenize, grouped into sentences. A '.', '!' or '?' token ends a
// sentence when it is followed by whitespace and an upper-case letter, or by
// the end of the text.
Corpus tokenize_sentences(std::string_view text);

inline constexpr double kDefaultSupportScale = 2.0;

// Logistic squash of a mutual-information value into (0,1); 0.5 at MI = 0.
double squash(double mi, double scale = kDefaultSupportScale);

class CollocationModel {
 public:
  explicit CollocationModel(int max_distance = 2);

  // Counts unigrams over all tokens and ordered pairs (a, b, d) where b
  // occurs exactly d positions after a inside the same sentence.
  static CollocationModel train(const Corpus& corpus, int max_distance);

  void add_sentence(const Sentence& sentence);

  int max_distance() const { return max_distance_; }
  std::uint64_t total_tokens() const { return total_; }
  std::size_t vocabulary_size() const { return words_.size(); }
  std::size_t pair_types() const { return pairs_.size(); }

  std::uint64_t unigram(std::string_view word) const;
  std::uint64_t pair(std::string_view a, std::string_view b, int distance) const;

  // log2( P(a,b;d) / (P(a) P(b)) ) with one added to the pair count and to
  // each unigram count. A word never seen in training carries no evidence:
  // the score is 0 whenever either word is unseen.
  double mi_score(std::string_view a, std::string_view b, int distance) const;

  // squash(mi_score(a, b, d), scale).
  double support(std::string_view a, std::string_view b, int distance,
                 double scale = kDefaultSupportScale) const;

  // Text format:
  //   collocation v1 D=<d> N=<total>
  //   [unigram]
  //   word TAB count
  //   [pair]
  //   a TAB b TAB d TAB count
  void save(std::ostream& out) const;
  static CollocationModel load(std::istream& in);

  friend bool operator==(const CollocationModel& a, const CollocationModel& b);

 private:
  using WordId = std::uint32_t;
  static std::uint64_t key(WordId a, WordId b, int distance);
  WordId intern(const std::string& word);
  const WordId* lookup(std::string_view word) const;
  void check_distance(int distance) const;

  int max_distance_;
  std::uint64_t total_ = 0;
  std::unordered_map<std::string, WordId> ids_;
  std::vector<std::string> words_;
  std::vector<std::uint64_t> unigrams_;
  std::unordered_map<std::uint64_t, std::uint64_t> pairs_;
};

inline CollocationModel train(const Corpus& corpus, int max_distance) {
  return CollocationModel::train(corpus, max_distance);
}
inline double mi_score(const CollocationModel& model, std::string_view a,
                       std::string_view b, int distance) {
  return model.mi_score(a, b, distance);
}
inline double support(const CollocationModel& model, std::string_view a,
                      std::string_view b, int distance,
                      double scale = kDefaultSupportScale) {
  return model.support(a, b, distance, scale);
}
inline void save_model(const CollocationModel& model, std::ostream& out) {
  model.save(out);
}
inline CollocationModel load_model(std::istream& in) {
  return CollocationModel::load(in);
}

}  // namespace candsel
