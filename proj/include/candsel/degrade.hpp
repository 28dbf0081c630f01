#pragma once

// Recognizer stand-in: a character-confusion channel that corrupts ground
// truth words, a lexicon with edit-distance lookup, and a generator that
// turns corrupted strings into scored top-k candidate sets.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "candsel/collocation.hpp"
#include "candsel/lattice.hpp"

namespace candsel {

using Rng = std::mt19937_64;

struct ConfusionModel {
  // Members of a class are confused with each other; a member may span
  // several characters ("rn" for "m").
  std::vector<std::vector<std::string>> classes;
  double sub_rate = 0.0;
  double truth_inclusion = 0.95;
  double score_noise = 0.0;

  static ConfusionModel defaults();
  void validate() const;

  friend bool operator==(const ConfusionModel&, const ConfusionModel&) = default;
};

// One class per line (members separated by whitespace) plus `sub_rate=`,
// `truth_inclusion=` and `score_noise=` lines. Lines starting with '#' are
// comments. A file without class lines keeps the default classes.
ConfusionModel read_confusion_model(std::istream& in);
void write_confusion_model(std::ostream& out, const ConfusionModel& model);

std::size_t edit_distance(std::string_view a, std::string_view b);

// Alignment cost counting only edits the channel cannot explain:
// substitutions between classmates are free, every other edit costs 1.
double channel_cost(std::string_view candidate, std::string_view observed,
                    const ConfusionModel& model);

// Dictionary backed by a BK-tree over Levenshtein distance.
class Lexicon {
 public:
  explicit Lexicon(std::vector<std::string> words);
  Lexicon(Lexicon&&) noexcept;
  Lexicon& operator=(Lexicon&&) noexcept;
  ~Lexicon();

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  bool contains(std::string_view word) const;

  // Every word within edit distance <= max_distance of `query`, sorted.
  std::vector<std::string> lookup(std::string_view query, std::size_t max_distance) const;

 private:
  struct Node;
  std::vector<std::string> words_;  // sorted, unique
  std::unique_ptr<Node> root_;
};

Lexicon read_lexicon(std::istream& in);
void write_lexicon(std::ostream& out, const Lexicon& lexicon);

// Corpus vocabulary plus channel neighbours of every vocabulary word (all
// single-substitution variants first, then a seeded sample of
// double-substitution variants) until `target_size` words are reached.
Lexicon build_desk_lexicon(const std::vector<std::string>& vocabulary,
                           const ConfusionModel& model, std::size_t target_size,
                           std::uint64_t seed);

std::vector<std::string> vocabulary_of(const Corpus& corpus);

// Substitutes each character (or multi-character class member) with
// probability sub_rate by a uniformly chosen classmate.
std::string corrupt_word(std::string_view word, const ConfusionModel& model, Rng& rng);

struct GeneratorParams {
  double edit_weight = 1.0;     // weight on edit distance
  double channel_weight = 0.5;  // weight on channel cost
  std::size_t max_edit = 2;     // lookup radius around the corrupted string
};

// Simulates a recognizer: corrupt the truth, retrieve lexicon words near the
// corrupted string, score them by exp(-edit_weight*ed - channel_weight*cost
// + noise), keep the top k, normalize. With probability truth_inclusion the
// truth is forced into the set (replacing the weakest entry); otherwise it
// is removed.
CandidateSet generate_candidate_set(ImageId image_id, const std::string& truth,
                                    const Lexicon& lexicon, const ConfusionModel& model,
                                    std::size_t k, Rng& rng,
                                    const GeneratorParams& params = {});

// One candidate set per token; image ids are assigned consecutively from
// first_id. Sentence i draws from an engine seeded with seed ^ i. Tokens
// missing from the lexicon get a singleton set holding the truth.
Page simulate_page(const Corpus& sentences, const Lexicon& lexicon,
                   const ConfusionModel& model, std::size_t k, std::uint64_t seed,
                   ImageId first_id = 1, const GeneratorParams& params = {});

// Top-1 correct rate over the word positions of a simulated page.
double simulated_top1(const Corpus& sample, const Lexicon& lexicon,
                      const ConfusionModel& model, std::size_t k, std::uint64_t seed,
                      const GeneratorParams& params = {});

struct CalibrationResult {
  ConfusionModel model;
  double achieved = 0.0;
  int steps = 0;
};

// Bisects sub_rate (and, if raising sub_rate alone cannot push accuracy
// down far enough, score_noise) until the simulated top-1 rate over `sample`
// is within `tolerance` of `target`. Throws CalibrationError after 30
// evaluations without success.
CalibrationResult calibrate(const Lexicon& lexicon, const ConfusionModel& model,
                            const Corpus& sample, double target, double tolerance,
                            std::size_t k, std::uint64_t seed,
                            const GeneratorParams& params = {});

}  // namespace candsel
