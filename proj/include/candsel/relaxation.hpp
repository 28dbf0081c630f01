#pragma once

// Collocation relaxation over candidate lattices.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "candsel/collocation.hpp"
#include "candsel/lattice.hpp"

namespace candsel {

enum class UpdateLaw {
  // s' = alpha*s + (1-alpha)*q with q = a*support / sum(a*support), where a
  // holds the anchor scores (the scores relaxation started from).
  Anchored,
  // As Anchored with the current scores in place of the anchor.
  Reinforce,
  // s' = alpha*s + (1-alpha)*support.
  Blend,
};

struct RelaxParams {
  double alpha = 0.7;
  int window = 1;
  double epsilon = 1e-4;
  int max_iters = 50;
  double prune_floor = 0.02;
  std::size_t keep_min = 3;
  double support_scale = kDefaultSupportScale;
  UpdateLaw law = UpdateLaw::Anchored;

  void validate() const;
};

// Mean support of `candidate` at `pos` against the top-1 words of the
// neighbours at distances 1..window on both sides. 0.5 without neighbours.
double neighbor_support(const SentenceLattice& sentence, std::size_t pos,
                        std::string_view candidate, const CollocationModel& model, int window,
                        double scale = kDefaultSupportScale);

struct StepResult {
  SentenceLattice sentence;
  double delta = 0.0;  // largest absolute score change, after normalization
  bool top1_changed = false;
};

// One synchronous update: every position reads the previous top-1s. The
// anchor defaults to the sentence itself.
StepResult relax_step(const SentenceLattice& sentence, const CollocationModel& model,
                      const RelaxParams& params, const SentenceLattice* anchor = nullptr);

struct TraceLine {
  std::size_t sentence = 0;
  int iteration = 0;
  double delta = 0.0;
};

struct RelaxTrace {
  std::vector<int> iterations;  // per sentence
  std::vector<bool> converged;  // per sentence
  std::vector<TraceLine> lines;
  double max_sum_error = 0.0;  // worst |sum - 1| seen after any step
  int rounds = 0;
  // Per-sentence anchors at exit, hook factors included. Empty unless the
  // law is Anchored.
  std::vector<SentenceLattice> anchors;

  std::size_t converged_count() const;
};

// Runs after every round over the page; returns the sentences it modified,
// which are put back into the active set. The change the hook made to each
// score is carried into that sentence's anchor as a factor.
using RelaxHook = std::function<std::vector<std::size_t>(Page& page, int round)>;

// Rounds of relax_step over every still-active sentence. A sentence leaves
// the active set once its delta drops below epsilon. Stops when no sentence
// is active or after max_iters rounds.
Page run_relaxation(Page page, const CollocationModel& model, const RelaxParams& params,
                    RelaxTrace* trace = nullptr, const RelaxHook& hook = {});

// Drops candidates below prune_floor, always keeping the best keep_min, and
// renormalizes the survivors.
Page prune(Page page, const RelaxParams& params);

// `sentence TAB iter TAB delta` per line.
void write_trace(std::ostream& out, const RelaxTrace& trace);

}  // namespace candsel
