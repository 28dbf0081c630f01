#include "candsel/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include "candsel/errors.hpp"

namespace candsel {

bool symbolic_relation_holds(std::string_view w1, std::string_view w2,
                             const SymbolicRelation& relation) {
  if (w1.empty() || w2.empty()) throw ValidationError("relation words must be non-empty");
  if (relation.min_length < 1) throw ValidationError("minimum shared length must be >= 1");
  const std::size_t L = relation.min_length;
  switch (relation.type) {
    case 1:
      return w1 == w2;
    case 2:
      return w1 != w2 && w2.find(w1) != std::string_view::npos;
    case 3: {
      auto [p1, p2] = std::mismatch(w1.begin(), w1.end(), w2.begin(), w2.end());
      return static_cast<std::size_t>(p1 - w1.begin()) >= L;
    }
    case 4: {
      auto [p1, p2] = std::mismatch(w1.rbegin(), w1.rend(), w2.rbegin(), w2.rend());
      return static_cast<std::size_t>(p1 - w1.rbegin()) >= L;
    }
    case 5:
      for (std::size_t len = L; len <= std::min(w1.size(), w2.size()); ++len) {
        if (std::equal(w1.end() - static_cast<std::ptrdiff_t>(len), w1.end(), w2.begin())) return true;
      }
      return false;
    default:
      throw ValidationError("relation type must be 1..5");
  }
}

void ConstraintParams::validate() const {
  if (!(boost >= 1.0) || !std::isfinite(boost)) throw ValidationError("boost must be >= 1");
  if (!(follow_gap >= 0.0 && follow_gap <= 1.0)) {
    throw ValidationError("follow gap must be in [0,1]");
  }
  if (min_length < 1) throw ValidationError("minimum shared length must be >= 1");
}

std::string to_string(EdgeAction action) {
  switch (action) {
    case EdgeAction::Boosted: return "boosted";
    case EdgeAction::Followed: return "followed";
    case EdgeAction::Skipped: return "skipped";
    case EdgeAction::NoCandidate: return "no-candidate";
  }
  return "skipped";
}

void write_constraint_log(std::ostream& out, const ConstraintLog& log) {
  for (const auto& e : log.edges) {
    out << "edge " << e.a << ' ' << e.b << ' ' << e.type << ' ' << to_string(e.action) << '\n';
  }
}

namespace {

CandidateSet& set_at(Page& page, const Location& loc) {
  return page.sentences[loc.sentence].positions[loc.position];
}

void scale_top1(CandidateSet& set, double factor) {
  const auto cands = set.candidates();
  std::vector<double> weights;
  weights.reserve(cands.size());
  for (const auto& c : cands) weights.push_back(c.score);
  weights[0] *= factor;
  set.reweight(weights);
}

void set_score_and_normalize(CandidateSet& set, std::size_t index, double score) {
  const auto cands = set.candidates();
  std::vector<double> weights;
  weights.reserve(cands.size());
  for (const auto& c : cands) weights.push_back(c.score);
  weights[index] = score;
  set.reweight(weights);
}

}  // namespace

std::vector<std::size_t> enforce(Page& page, const RelationGraph& graph,
                                 const ConstraintParams& params, ConstraintLog* log) {
  params.validate();
  const auto index = index_page(page);
  auto locate = [&](ImageId id) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw ValidationError("relation graph refers to unknown image " + std::to_string(id));
    }
    return it->second;
  };

  std::vector<RelationEdge> edges = graph.edges;
  std::stable_sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) {
    return std::tie(x.a, x.b, x.type) < std::tie(y.a, y.b, y.type);
  });

  std::set<std::size_t> touched;
  std::set<std::pair<ImageId, std::string>> local;
  auto& boosted = log ? log->boosted : local;
  for (const auto& edge : edges) {
    const Location la = locate(edge.a);
    const Location lb = locate(edge.b);
    if (edge.a == edge.b) continue;
    CandidateSet& sa = set_at(page, la);
    CandidateSet& sb = set_at(page, lb);
    const SymbolicRelation rel{edge.type, params.min_length};
    EdgeAction action = EdgeAction::Skipped;

    if (symbolic_relation_holds(sa.top1().word, sb.top1().word, rel)) {
      if (boosted.emplace(edge.a, sa.top1().word).second && params.boost != 1.0) {
        scale_top1(sa, params.boost);
        touched.insert(la.sentence);
      }
      if (boosted.emplace(edge.b, sb.top1().word).second && params.boost != 1.0) {
        scale_top1(sb, params.boost);
        touched.insert(lb.sentence);
      }
      action = EdgeAction::Boosted;
    } else if (edge.type == 1 &&
               std::abs(sa.top1().score - sb.top1().score) >= params.follow_gap) {
      const bool a_leads = sa.top1().score > sb.top1().score;
      CandidateSet& leader = a_leads ? sa : sb;
      CandidateSet& follower = a_leads ? sb : sa;
      const Location& where = a_leads ? lb : la;
      action = EdgeAction::NoCandidate;
      if (auto i = follower.find(leader.top1().word)) {
        set_score_and_normalize(follower, *i, leader.top1().score);
        touched.insert(where.sentence);
        action = EdgeAction::Followed;
        if (log) ++log->promotions;
      }
    }
    if (log) log->edges.push_back({edge.a, edge.b, edge.type, action});
  }
  return {touched.begin(), touched.end()};
}

std::vector<std::size_t> cluster_consensus(Page& page, const std::vector<Cluster>& clusters,
                                           const ConstraintParams& params,
                                           ConstraintLog* log) {
  params.validate();
  const auto index = index_page(page);
  std::set<std::size_t> touched;
  for (const auto& cluster : clusters) {
    if (cluster.size() < 2) continue;
    std::vector<Location> members;
    for (ImageId id : cluster) {
      auto it = index.find(id);
      if (it == index.end()) {
        throw ValidationError("cluster refers to unknown image " + std::to_string(id));
      }
      members.push_back(it->second);
    }
    std::map<std::string, double> votes;
    for (const auto& m : members) {
      const Candidate& top = set_at(page, m).top1();
      votes[top.word] += params.vote == VoteRule::ConfidenceWeighted ? top.score : 1.0;
    }
    // std::map iterates words in order, so a strict '>' keeps the smallest on ties.
    auto winner = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      if (it->second > winner->second) winner = it;
    }
    for (const auto& m : members) {
      CandidateSet& set = set_at(page, m);
      if (set.top1().word == winner->first) continue;
      if (promote(set, winner->first)) {
        touched.insert(m.sentence);
        if (log) ++log->promotions;
      } else if (log) {
        ++log->consensus_misses;
      }
    }
  }
  return {touched.begin(), touched.end()};
}

namespace {

Page finish(Page page, const RelaxParams& relax, const Grammar& grammar,
            const TagLexicon& lexicon, IntegrateStats* stats) {
  page = prune(std::move(page), relax);
  return select_by_parse(std::move(page), grammar, lexicon, stats ? &stats->select : nullptr);
}

}  // namespace

Page relax_and_parse(Page page, const CollocationModel& model, const RelaxParams& relax,
                     const Grammar& grammar, const TagLexicon& lexicon, IntegrateStats* stats) {
  page = run_relaxation(std::move(page), model, relax, stats ? &stats->trace : nullptr);
  if (stats) stats->relaxed = page;
  return finish(std::move(page), relax, grammar, lexicon, stats);
}

Page integrate(Page page, const CollocationModel& model, const RelationGraph& graph,
               const RelaxParams& relax, const ConstraintParams& constraints,
               const Grammar& grammar, const TagLexicon& lexicon, IntegrateStats* stats) {
  constraints.validate();
  ConstraintLog local;
  ConstraintLog& log = stats ? stats->constraints : local;
  log = ConstraintLog{};

  auto apply = [&](Page& p) {
    auto a = enforce(p, graph, constraints, &log);
    auto b = cluster_consensus(p, graph.type1_clusters, constraints, &log);
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
  };
  RelaxHook hook = [&](Page& p, int) { return apply(p); };
  page = run_relaxation(std::move(page), model, relax, stats ? &stats->trace : nullptr, hook);
  if (stats) stats->relaxed = page;
  page = finish(std::move(page), relax, grammar, lexicon, stats);
  apply(page);
  return page;
}

}  // namespace candsel
