#include "candsel/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "candsel/errors.hpp"

namespace candsel {

void RelaxParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in [0,1]");
  if (window != 1 && window != 2) throw ValidationError("window must be 1 or 2");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (!(prune_floor >= 0.0 && prune_floor < 1.0)) {
    throw ValidationError("prune_floor must be in [0,1)");
  }
  if (keep_min < 1) throw ValidationError("keep_min must be >= 1");
  if (!(support_scale > 0.0)) throw ValidationError("support scale must be positive");
}

double neighbor_support(const SentenceLattice& sentence, std::size_t pos,
                        std::string_view candidate, const CollocationModel& model, int window,
                        double scale) {
  const auto& positions = sentence.positions;
  if (pos >= positions.size()) throw ValidationError("position outside the sentence");
  if (window < 1 || window > model.max_distance()) {
    throw ValidationError("window exceeds the model's maximum distance");
  }
  double total = 0.0;
  int count = 0;
  for (int d = 1; d <= window; ++d) {
    const auto ud = static_cast<std::size_t>(d);
    if (pos >= ud) {
      total += model.support(positions[pos - ud].top1().word, candidate, d, scale);
      ++count;
    }
    if (pos + ud < positions.size()) {
      total += model.support(candidate, positions[pos + ud].top1().word, d, scale);
      ++count;
    }
  }
  return count == 0 ? 0.5 : total / count;
}

StepResult relax_step(const SentenceLattice& sentence, const CollocationModel& model,
                      const RelaxParams& params, const SentenceLattice* anchor) {
  StepResult result{sentence, 0.0};
  if (params.alpha == 1.0) return result;
  if (params.law != UpdateLaw::Anchored || !anchor) anchor = &sentence;
  if (anchor->positions.size() != sentence.positions.size()) {
    throw ValidationError("anchor does not match the sentence");
  }

  const double a = params.alpha;
  for (std::size_t pos = 0; pos < sentence.positions.size(); ++pos) {
    const CandidateSet& before = sentence.positions[pos];
    const auto cands = before.candidates();
    std::vector<double> support(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      support[i] = neighbor_support(sentence, pos, cands[i].word, model, params.window,
                                    params.support_scale);
    }
    std::vector<double> next(cands.size());
    if (params.law != UpdateLaw::Blend) {
      const CandidateSet& base = anchor->positions[pos];
      std::vector<double> prior(cands.size());
      double z = 0.0;
      for (std::size_t i = 0; i < cands.size(); ++i) {
        auto j = base.find(cands[i].word);
        if (!j) throw ValidationError("anchor lacks candidate '" + cands[i].word + "'");
        prior[i] = base[*j].score;
        z += prior[i] * support[i];
      }
      for (std::size_t i = 0; i < cands.size(); ++i) {
        double q = z > 0.0 ? prior[i] * support[i] / z : prior[i];
        next[i] = a * cands[i].score + (1.0 - a) * q;
      }
    } else {
      for (std::size_t i = 0; i < cands.size(); ++i) {
        next[i] = a * cands[i].score + (1.0 - a) * support[i];
      }
    }
    CandidateSet& after = result.sentence.positions[pos];
    after.reweight(next);
    if (after.top1().word != before.top1().word) result.top1_changed = true;
    for (const auto& c : after.candidates()) {
      double old = cands[*before.find(c.word)].score;
      result.delta = std::max(result.delta, std::abs(c.score - old));
    }
  }
  return result;
}

namespace {

// anchor *= after / before, per candidate, then renormalize.
void carry_into_anchor(SentenceLattice& anchor, const SentenceLattice& before,
                       const SentenceLattice& after) {
  for (std::size_t pos = 0; pos < anchor.positions.size(); ++pos) {
    CandidateSet& a = anchor.positions[pos];
    const CandidateSet& b = before.positions[pos];
    const CandidateSet& c = after.positions[pos];
    if (b == c) continue;
    std::vector<double> weights;
    weights.reserve(a.size());
    for (const auto& cand : a.candidates()) {
      double old = b[*b.find(cand.word)].score;
      double now = c[*c.find(cand.word)].score;
      weights.push_back(old > 0.0 ? cand.score * now / old : now);
    }
    a.reweight(weights);
  }
}

}  // namespace

std::size_t RelaxTrace::converged_count() const {
  return static_cast<std::size_t>(std::count(converged.begin(), converged.end(), true));
}

Page run_relaxation(Page page, const CollocationModel& model, const RelaxParams& params,
                    RelaxTrace* trace, const RelaxHook& hook) {
  params.validate();
  const std::size_t n = page.sentences.size();
  std::vector<bool> active(n, true);
  std::vector<int> iterations(n, 0);
  std::vector<bool> converged(n, false);
  RelaxTrace local;
  RelaxTrace& t = trace ? *trace : local;
  t = RelaxTrace{};

  std::vector<SentenceLattice> anchors;
  if (params.law == UpdateLaw::Anchored) anchors = page.sentences;
  auto anchor_of = [&](std::size_t s) { return anchors.empty() ? nullptr : &anchors[s]; };

  int round = 0;
  while (round < params.max_iters && std::find(active.begin(), active.end(), true) != active.end()) {
    ++round;
    for (std::size_t s = 0; s < n; ++s) {
      if (!active[s]) continue;
      StepResult step = relax_step(page.sentences[s], model, params, anchor_of(s));
      page.sentences[s] = std::move(step.sentence);
      ++iterations[s];
      t.lines.push_back({s, iterations[s], step.delta});
      for (const auto& set : page.sentences[s].positions) {
        t.max_sum_error = std::max(t.max_sum_error, std::abs(set.sum() - 1.0));
      }
      // A new top-1 changes the neighbours' support, so that step is not final.
      if (step.delta < params.epsilon && !step.top1_changed) {
        active[s] = false;
        converged[s] = true;
      }
    }
    if (hook) {
      std::vector<SentenceLattice> before;
      if (!anchors.empty()) before = page.sentences;
      for (std::size_t s : hook(page, round)) {
        if (s >= n) throw ValidationError("relaxation hook reported an unknown sentence");
        active[s] = true;
        converged[s] = false;
        if (!anchors.empty()) carry_into_anchor(anchors[s], before[s], page.sentences[s]);
        for (const auto& set : page.sentences[s].positions) {
          t.max_sum_error = std::max(t.max_sum_error, std::abs(set.sum() - 1.0));
        }
      }
    }
  }
  t.iterations = std::move(iterations);
  t.converged = std::move(converged);
  t.rounds = round;
  t.anchors = std::move(anchors);
  return page;
}

Page prune(Page page, const RelaxParams& params) {
  params.validate();
  for (auto& sentence : page.sentences) {
    for (auto& set : sentence.positions) {
      std::vector<std::size_t> keep;
      const auto cands = set.candidates();
      for (std::size_t i = 0; i < cands.size(); ++i) {
        if (i < params.keep_min || cands[i].score >= params.prune_floor) keep.push_back(i);
      }
      if (keep.size() == cands.size()) continue;
      set.retain(keep);
      set.normalize();
    }
  }
  return page;
}

void write_trace(std::ostream& out, const RelaxTrace& trace) {
  char delta[32];
  for (const auto& line : trace.lines) {
    std::snprintf(delta, sizeof delta, "%.9g", line.delta);
    out << line.sentence << '\t' << line.iteration << '\t' << delta << '\n';
  }
}

}  // namespace candsel
