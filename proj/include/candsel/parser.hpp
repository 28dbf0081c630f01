#pragma once

// Probabilistic CKY chart parsing over candidate lattices.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "candsel/lattice.hpp"

namespace candsel {

struct Rule {
  std::string lhs;
  std::vector<std::string> rhs;  // two symbols, or one preterminal tag
  double prob = 0.0;
};

// Chomsky normal form: A -> B C, or A -> T with T a preterminal tag.
// Probabilities of every left-hand side sum to 1 within 1e-6.
class Grammar {
 public:
  struct Binary {
    int lhs;
    int left;
    int right;
    double log_prob;
  };
  struct Unary {
    int lhs;
    int tag;
    double log_prob;
  };

  Grammar(std::string start, const std::vector<Rule>& rules, const std::vector<std::string>& tags);

  int start() const { return start_; }
  std::size_t symbol_count() const { return symbols_.size(); }
  const std::string& name(int symbol) const { return symbols_[static_cast<std::size_t>(symbol)]; }
  bool is_tag(int symbol) const { return is_tag_[static_cast<std::size_t>(symbol)]; }
  // -1 when absent.
  int find(std::string_view name) const;
  const std::vector<Binary>& binary() const { return binary_; }
  const std::vector<Unary>& unary() const { return unary_; }
  std::size_t rule_count() const { return binary_.size() + unary_.size(); }

 private:
  int intern(const std::string& name, bool tag);

  std::vector<std::string> symbols_;
  std::vector<bool> is_tag_;
  std::map<std::string, int, std::less<>> ids_;
  int start_ = -1;
  std::vector<Binary> binary_;
  std::vector<Unary> unary_;
};

using TagDistribution = std::vector<std::pair<std::string, double>>;

// word -> P(tag | word). Words without an entry use the fallback
// distribution (uniform over N, V, Adj unless overridden).
class TagLexicon {
 public:
  TagLexicon();

  void add(std::string word, TagDistribution tags);
  void set_unknown(TagDistribution tags);
  const TagDistribution& tags(std::string_view word) const;
  const TagDistribution& unknown() const { return unknown_; }
  bool known(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }
  // Every tag mentioned, sorted.
  std::vector<std::string> tag_names() const;

 private:
  std::map<std::string, TagDistribution, std::less<>> entries_;
  TagDistribution unknown_;
};

struct LoadedGrammar {
  Grammar grammar;
  TagLexicon lexicon;
};

// Line format ('#' starts a comment line):
//   start S
//   A -> B C 0.6
//   A -> T 0.4
//   @unknown N:0.5,V:0.5
//   word TAB tag:prob,tag:prob
// Throws ParseError (with the line) on malformed or non-normal-form input.
LoadedGrammar load_grammar(std::istream& in);
LoadedGrammar load_grammar_file(const std::string& path);

struct ParseNode {
  int symbol = -1;
  int left = -1;   // child node indices; -1 for leaves
  int right = -1;
  std::size_t position = 0;  // leaves: the position and candidate chosen
  std::size_t candidate = 0;
};

struct ParseResult {
  bool parsed = false;
  std::vector<std::string> selections;  // one word per position when parsed
  std::vector<ParseNode> nodes;         // nodes[0] is the root
  double log_score = 0.0;               // Viterbi log probability

  // Bracketed tree, e.g. (S (NP (Det the) (N form)) (Punc .)).
  std::string tree(const Grammar& grammar, const SentenceLattice& sentence) const;
};

// Viterbi parse. Leaf weight: candidate score times P(tag | word).
ParseResult parse_lattice(const SentenceLattice& sentence, const Grammar& grammar,
                          const TagLexicon& lexicon);

// Sum over every (assignment, tree) derivation of the start symbol; 0 when
// there is none.
double inside_probability(const SentenceLattice& sentence, const Grammar& grammar,
                          const TagLexicon& lexicon);

// Log probability of the tree stored in `result`, recomputed from its nodes.
double derivation_log_score(const ParseResult& result, const SentenceLattice& sentence,
                            const Grammar& grammar, const TagLexicon& lexicon);

inline constexpr double kPromotionDelta = 0.01;

struct SelectStats {
  std::size_t sentences = 0;
  std::size_t parsed = 0;
};

// Promotes every Viterbi-selected candidate that is not already top-1 to
// max + delta and renormalizes. Unparsed sentences are left alone.
Page select_by_parse(Page page, const Grammar& grammar, const TagLexicon& lexicon,
                     SelectStats* stats = nullptr);

// Raises `word` to max + delta and renormalizes, unless it already ranks
// first. Returns false when the word is absent.
bool promote(CandidateSet& set, std::string_view word, double delta = kPromotionDelta);

}  // namespace candsel
