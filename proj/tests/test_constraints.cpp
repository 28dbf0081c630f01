#include "candsel/constraints.hpp"
#include "candsel/errors.hpp"

#include "doctest.h"

#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace candsel;

namespace {

std::vector<CandidateSet::Entry> form_set() {
  return {{"farm", 0.35}, {"form", 0.30}, {"forth", 0.20}, {"foam", 0.11}, {"force", 0.04}};
}

SentenceLattice words(ImageId first, const std::vector<std::string>& ws) {
  SentenceLattice s;
  for (const auto& w : ws) s.positions.emplace_back(first++, std::vector<CandidateSet::Entry>{{w, 1.0}}, w);
  return s;
}

// "This form is almost the same as that one ." and
// "Please fill in the application form", images 1-10 and 11-16.
Page example_pages() {
  Page page;
  SentenceLattice one = words(1, {"This", "form", "is", "almost", "the", "same", "as", "that", "one", "."});
  one.positions[1] = CandidateSet(2, form_set(), "form");
  SentenceLattice two = words(11, {"Please", "fill", "in", "the", "application", "form"});
  two.positions[5] = CandidateSet(16, form_set(), "form");
  page.sentences = {one, two};
  return page;
}

// Right-branching grammar that parses any sentence with one open tag.
struct AnyGrammar {
  Grammar grammar{"S", {{"S", {"X", "S"}, 0.5}, {"S", {"W"}, 0.5}, {"X", {"W"}, 1.0}}, {"W"}};
  TagLexicon lexicon;
  AnyGrammar() { lexicon.set_unknown({{"W", 1.0}}); }
};

CandidateSet& at(Page& page, std::size_t s, std::size_t p) { return page.sentences[s].positions[p]; }

}  // namespace

TEST_CASE("symbolic relations") {
  SymbolicRelation t1{1};
  SymbolicRelation t2{2};
  CHECK(symbolic_relation_holds("form", "form", t1));
  CHECK_FALSE(symbolic_relation_holds("form", "farm", t1));
  CHECK(symbolic_relation_holds("is", "This", t2));
  CHECK_FALSE(symbolic_relation_holds("This", "This", t2));
  CHECK_FALSE(symbolic_relation_holds("This", "is", t2));
  CHECK(symbolic_relation_holds("fill", "till", {4, 3}));
  CHECK_FALSE(symbolic_relation_holds("fill", "tall", {4, 3}));
  CHECK(symbolic_relation_holds("form", "forth", {3, 3}));
  CHECK_FALSE(symbolic_relation_holds("form", "farm", {3, 2}));
  CHECK(symbolic_relation_holds("visual", "algorithm", {5, 2}));
  CHECK_FALSE(symbolic_relation_holds("algorithm", "visual", {5, 2}));
  CHECK_FALSE(symbolic_relation_holds("visual", "algorithm", {5, 3}));
}

TEST_CASE("consistent pairs are boosted once per decision") {
  Page page;
  page.sentences.push_back(words(1, {"x"}));
  page.sentences[0].positions[0] = CandidateSet(1, {{"form", 0.6}, {"farm", 0.4}});
  page.sentences.push_back(words(2, {"y"}));
  page.sentences[1].positions[0] = CandidateSet(2, {{"form", 0.55}, {"foam", 0.45}});
  RelationGraph g;
  g.nodes = {1, 2};
  g.edges = {{1, 2, 1, 1.0, {}}};
  ConstraintLog log;
  auto touched = enforce(page, g, ConstraintParams{}, &log);
  CHECK(touched == std::vector<std::size_t>{0, 1});
  CHECK(at(page, 0, 0).top1().word == "form");
  CHECK(at(page, 0, 0).top1().score == doctest::Approx(0.9 / 1.3));
  CHECK(at(page, 1, 0).top1().score == doctest::Approx(0.825 / 1.275));
  REQUIRE(log.edges.size() == 1);
  CHECK(log.edges[0].action == EdgeAction::Boosted);
  Page after = page;
  CHECK(enforce(page, g, ConstraintParams{}, &log).empty());
  CHECK(page == after);
}

TEST_CASE("the weaker image follows the leader on type-1 edges") {
  Page page = example_pages();
  at(page, 1, 5) = CandidateSet(16, {{"form", 0.7}, {"farm", 0.2}, {"forth", 0.1}}, "form");
  RelationGraph g;
  g.edges = {{2, 16, 1, 1.0, {}}};
  ConstraintLog log;
  auto touched = enforce(page, g, ConstraintParams{}, &log);
  CHECK(touched == std::vector<std::size_t>{0});
  CHECK(at(page, 0, 1).top1().word == "form");
  CHECK(log.edges[0].action == EdgeAction::Followed);
  CHECK(log.promotions == 1);
}

TEST_CASE("no action below the gap, without a candidate, or off type 1") {
  Page page = example_pages();
  at(page, 1, 5) = CandidateSet(16, {{"form", 0.45}, {"farm", 0.3}, {"forth", 0.25}}, "form");
  const Page start = page;
  RelationGraph g;
  g.edges = {{2, 16, 1, 1.0, {}}};
  ConstraintLog log;
  CHECK(enforce(page, g, ConstraintParams{}, &log).empty());
  CHECK(page == start);
  CHECK(log.edges[0].action == EdgeAction::Skipped);

  at(page, 1, 5) = CandidateSet(16, {{"fork", 0.9}, {"fort", 0.1}}, "form");
  const Page no_candidate = page;
  log = {};
  enforce(page, g, ConstraintParams{}, &log);
  CHECK(page == no_candidate);
  CHECK(log.edges[0].action == EdgeAction::NoCandidate);

  g.edges = {{2, 16, 3, 1.0, {}}};
  log = {};
  enforce(page, g, ConstraintParams{}, &log);
  CHECK(page == no_candidate);
  CHECK(log.edges[0].action == EdgeAction::Skipped);

  g.edges = {{2, 99, 1, 1.0, {}}};
  CHECK_THROWS_AS(enforce(page, g, ConstraintParams{}), ValidationError);
}

TEST_CASE("cluster consensus votes by confidence") {
  Page page;
  page.sentences.push_back(words(1, {"a", "b", "c", "d"}));
  at(page, 0, 0) = CandidateSet(1, {{"form", 0.6}, {"farm", 0.4}});
  at(page, 0, 1) = CandidateSet(2, {{"farm", 0.35}, {"form", 0.3}, {"foam", 0.35}});
  at(page, 0, 2) = CandidateSet(3, {{"form", 0.55}, {"farm", 0.45}});
  at(page, 0, 3) = CandidateSet(4, {{"farm", 0.9}, {"foam", 0.1}});
  ConstraintLog log;
  auto touched = cluster_consensus(page, {{1, 2, 3, 4}}, ConstraintParams{}, &log);
  // form 1.15 against farm 0.35 + 0.9.
  CHECK(at(page, 0, 0).top1().word == "farm");
  CHECK(touched == std::vector<std::size_t>{0});

  Page three;
  three.sentences.push_back(words(1, {"a", "b", "c"}));
  at(three, 0, 0) = CandidateSet(1, {{"form", 0.6}, {"farm", 0.4}});
  at(three, 0, 1) = CandidateSet(2, {{"farm", 0.35}, {"form", 0.3}, {"forth", 0.35}});
  at(three, 0, 2) = CandidateSet(3, {{"form", 0.55}, {"farm", 0.45}});
  log = {};
  cluster_consensus(three, {{1, 2, 3}}, ConstraintParams{}, &log);
  CHECK(at(three, 0, 1).top1().word == "form");
  CHECK(at(three, 0, 1).top1().score == doctest::Approx(0.36 / 1.06));
  CHECK(log.consensus_misses == 0);

  Page tie;
  tie.sentences.push_back(words(1, {"a", "b", "c"}));
  at(tie, 0, 0) = CandidateSet(1, {{"form", 0.5}, {"farm", 0.5}});
  at(tie, 0, 1) = CandidateSet(2, {{"farm", 0.5}, {"form", 0.5}});
  at(tie, 0, 2) = CandidateSet(3, {{"fort", 1.0}});
  log = {};
  cluster_consensus(tie, {{1, 2, 3}}, ConstraintParams{}, &log);
  CHECK(at(tie, 0, 0).top1().word == "farm");
  CHECK(at(tie, 0, 1).top1().word == "farm");
  CHECK(at(tie, 0, 2).top1().word == "fort");
  CHECK(log.consensus_misses == 1);

  Page single = three;
  CHECK(cluster_consensus(single, {{1}}, ConstraintParams{}).empty());
  CHECK(single == three);
}

TEST_CASE("majority vote counts members") {
  Page page;
  page.sentences.push_back(words(1, {"a", "b", "c"}));
  at(page, 0, 0) = CandidateSet(1, {{"form", 0.9}, {"farm", 0.1}});
  at(page, 0, 1) = CandidateSet(2, {{"farm", 0.6}, {"form", 0.4}});
  at(page, 0, 2) = CandidateSet(3, {{"farm", 0.6}, {"form", 0.4}});
  ConstraintParams p;
  p.vote = VoteRule::Majority;
  cluster_consensus(page, {{1, 2, 3}}, p);
  CHECK(at(page, 0, 0).top1().word == "farm");
}

TEST_CASE("the two example sentences both decide form") {
  Corpus corpus;
  for (int i = 0; i < 30; ++i) {
    corpus.push_back({"Please", "fill", "in", "the", "application", "form"});
    corpus.push_back({"The", "farm", "was", "big", "."});
  }
  const CollocationModel model = CollocationModel::train(corpus, 2);
  AnyGrammar g;

  Page page = example_pages();
  Page b = relax_and_parse(page, model, RelaxParams{}, g.grammar, g.lexicon);
  CHECK(at(b, 1, 5).top1().word == "form");
  CHECK(at(b, 0, 1).top1().word != "form");

  std::map<ImageId, Bitmap> images;
  for (const auto& s : page.sentences) {
    for (const auto& set : s.positions) images.emplace(set.image_id(), render_word(*set.truth()));
  }
  RelationGraph graph = detect_relations(images, RelationThresholds::type1_only(1.0));
  REQUIRE(graph.edges.size() == 2);  // form-form and the-the
  IntegrateStats stats;
  Page c = integrate(page, model, graph, RelaxParams{}, ConstraintParams{}, g.grammar, g.lexicon,
                     &stats);
  CHECK(at(c, 0, 1).top1().word == "form");
  CHECK(at(c, 1, 5).top1().word == "form");
  CHECK(stats.trace.converged_count() == 2);
}

TEST_CASE("an empty graph leaves the constraint-free result") {
  Corpus corpus{{"the", "application", "form"}, {"the", "farm"}};
  const CollocationModel model = CollocationModel::train(corpus, 2);
  AnyGrammar g;
  Page page = example_pages();
  Page b = relax_and_parse(page, model, RelaxParams{}, g.grammar, g.lexicon);
  RelationGraph empty;
  Page c = integrate(page, model, empty, RelaxParams{}, ConstraintParams{}, g.grammar, g.lexicon);
  CHECK(c == b);
}

TEST_CASE("constraint parameters and log") {
  ConstraintParams p;
  p.boost = 0.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = {};
  p.follow_gap = 1.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  ConstraintLog log;
  log.edges = {{2, 16, 1, EdgeAction::Followed}};
  std::ostringstream out;
  write_constraint_log(out, log);
  CHECK(out.str() == "edge 2 16 1 followed\n");
}
