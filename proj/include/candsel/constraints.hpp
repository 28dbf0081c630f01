#pragma once

// Visual inter-word constraints applied to candidate scores.

#include <cstddef>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "candsel/collocation.hpp"
#include "candsel/imaging.hpp"
#include "candsel/lattice.hpp"
#include "candsel/parser.hpp"
#include "candsel/relaxation.hpp"

namespace candsel {

struct SymbolicRelation {
  int type = 1;
  std::size_t min_length = 2;  // types 3-5: shortest shared prefix/suffix/overlap
};

//   1  w1 == w2
//   2  w1 is a proper substring of w2
//   3  common prefix of length >= min_length
//   4  common suffix of length >= min_length
//   5  a suffix of w1 of length >= min_length is a prefix of w2
bool symbolic_relation_holds(std::string_view w1, std::string_view w2,
                             const SymbolicRelation& relation);

enum class VoteRule {
  ConfidenceWeighted,  // sum of top-1 scores per word
  Majority,            // one vote per member
};

struct ConstraintParams {
  double boost = 1.5;
  double follow_gap = 0.2;
  std::size_t min_length = 2;
  VoteRule vote = VoteRule::ConfidenceWeighted;

  void validate() const;
};

enum class EdgeAction { Boosted, Followed, Skipped, NoCandidate };

struct EdgeRecord {
  ImageId a = 0;
  ImageId b = 0;
  int type = 1;
  EdgeAction action = EdgeAction::Skipped;
};

struct ConstraintLog {
  std::vector<EdgeRecord> edges;
  std::size_t consensus_misses = 0;
  std::size_t promotions = 0;  // follows plus consensus promotions
  // (image, word) decisions already boosted; a decision is boosted once.
  std::set<std::pair<ImageId, std::string>> boosted;
};

// `edge a b type action` per line.
void write_constraint_log(std::ostream& out, const ConstraintLog& log);
std::string to_string(EdgeAction action);

// One pass over the edges in (a, b, type) order. Consistent top-1s are both
// multiplied by `boost`; with a log, each (image, word) decision is boosted
// only once across calls. A type-1 edge whose top-1s disagree by at least
// `follow_gap` in confidence makes the weaker image adopt the leader's word
// when its own set holds it. Returns the sentences whose scores changed.
std::vector<std::size_t> enforce(Page& page, const RelationGraph& graph,
                                 const ConstraintParams& params, ConstraintLog* log = nullptr);

// Per cluster: vote over the members' top-1 words (ties go to the
// lexicographically smallest word) and promote the winner in every member
// that holds it. Returns the sentences whose decision changed.
std::vector<std::size_t> cluster_consensus(Page& page, const std::vector<Cluster>& clusters,
                                           const ConstraintParams& params,
                                           ConstraintLog* log = nullptr);

struct IntegrateStats {
  RelaxTrace trace;
  Page relaxed;  // the page when relaxation stopped, before pruning
  SelectStats select;
  ConstraintLog constraints;
};

// Relaxation with enforce + cluster_consensus after every round, then
// prune, select_by_parse and a last enforce + cluster_consensus.
Page integrate(Page page, const CollocationModel& model, const RelationGraph& graph,
               const RelaxParams& relax, const ConstraintParams& constraints,
               const Grammar& grammar, const TagLexicon& lexicon,
               IntegrateStats* stats = nullptr);

// The constraint-free schedule: relaxation, prune, select_by_parse.
Page relax_and_parse(Page page, const CollocationModel& model, const RelaxParams& relax,
                     const Grammar& grammar, const TagLexicon& lexicon,
                     IntegrateStats* stats = nullptr);

}  // namespace candsel
