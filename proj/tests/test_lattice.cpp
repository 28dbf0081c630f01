#include "candsel/errors.hpp"
#include "candsel/lattice.hpp"

#include "doctest.h"

#include <sstream>
#include <vector>

using namespace candsel;

namespace {

SentenceLattice sentence_of(std::vector<CandidateSet> sets) { return {std::move(sets)}; }

}  // namespace

TEST_CASE("candidate sets rank by score then word") {
  CandidateSet set(7, {{"forth", 0.2}, {"form", 0.3}, {"farm", 0.3}, {"foam", 0.2}});
  REQUIRE(set.size() == 4);
  CHECK(set[0].word == "farm");
  CHECK(set[1].word == "form");
  CHECK(set[2].word == "foam");
  CHECK(set[3].word == "forth");
  CHECK(set.top1().word == "farm");
  CHECK(set.find("forth") == 3u);
  CHECK_FALSE(set.contains("force"));
}

TEST_CASE("candidate sets reject bad entries") {
  CHECK_THROWS_AS(CandidateSet(1, {}), ValidationError);
  CHECK_THROWS_AS(CandidateSet(1, {{"a", 0.5}, {"a", 0.5}}), ValidationError);
  CHECK_THROWS_AS(CandidateSet(1, {{"", 1.0}}), ValidationError);
  CHECK_THROWS_AS(CandidateSet(1, {{"a", 1.5}}), ValidationError);
  CHECK_THROWS_AS(CandidateSet(1, {{"a", -0.1}}), ValidationError);
  CHECK_THROWS_AS(CandidateSet(1, {{"a", 0.5}, {"b", 0.5}}, std::nullopt, 1), ValidationError);
}

TEST_CASE("reweight normalizes and re-sorts") {
  CandidateSet set(1, {{"a", 0.5}, {"b", 0.3}, {"c", 0.2}});
  std::vector<double> w{1.0, 2.0, 1.0};  // aligned with a, b, c
  set.reweight(w);
  CHECK(set.top1().word == "b");
  CHECK(set.top1().score == doctest::Approx(0.5));
  CHECK(set.sum() == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> zero(3, 0.0);
  CHECK_THROWS_AS(set.reweight(zero), DegenerateInputError);
}

TEST_CASE("retain keeps the listed candidates") {
  CandidateSet set(1, {{"a", 0.5}, {"b", 0.3}, {"c", 0.2}});
  std::vector<std::size_t> keep{0, 2};
  set.retain(keep);
  set.normalize();
  REQUIRE(set.size() == 2);
  CHECK(set[1].word == "c");
  CHECK(set[1].score == doctest::Approx(0.2 / 0.7));
}

TEST_CASE("page validation") {
  Page page;
  page.sentences.push_back(sentence_of({CandidateSet(1, {{"a", 1.0}}), CandidateSet(1, {{"b", 1.0}})}));
  CHECK_THROWS_AS(validate(page), ValidationError);
  page.sentences[0].positions[1] = CandidateSet(2, {{"b", 1.0}});
  CHECK_NOTHROW(validate(page));
  page.bitmaps.emplace(9, Bitmap(1, 1));
  CHECK_THROWS_AS(validate(page), ValidationError);
  page.bitmaps.clear();
  page.sentences.push_back({});
  CHECK_THROWS_AS(validate(page), ValidationError);
}

TEST_CASE("page text round trip") {
  Page page;
  page.sentences.push_back(sentence_of({
      CandidateSet(1, {{"This", 1.0}}, "This"),
      CandidateSet(2, {{"farm", 0.35}, {"form", 0.30}, {"forth", 0.20}, {"foam", 0.11}, {"force", 0.04}}, "form"),
  }));
  page.sentences.push_back(sentence_of({CandidateSet(3, {{".", 1.0}}, ".")}));
  std::stringstream buf;
  write_page(buf, page);
  Page back = read_page(buf);
  CHECK(back == page);
  std::stringstream again;
  write_page(again, back);
  std::stringstream first;
  write_page(first, page);
  CHECK(again.str() == first.str());
}

TEST_CASE("malformed page lines report their line") {
  std::istringstream in("1\tform\tform:0.5,farm\n");
  try {
    read_page(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1u);
  }
}

TEST_CASE("rates count word positions only") {
  Page page;
  page.sentences.push_back(sentence_of({
      CandidateSet(1, {{"farm", 0.6}, {"form", 0.4}}, "form"),
      CandidateSet(2, {{"is", 1.0}}, "is"),
      CandidateSet(3, {{".", 1.0}}, "."),
  }));
  CHECK(word_truth_of(page).size() == 2);
  CHECK(word_correct_rate(page) == doctest::Approx(0.5));
  CHECK(correct_rate(decide_page(page), truth_of(page)) == doctest::Approx(2.0 / 3.0));
  TruthMap partial{{1, "form"}};
  CHECK_THROWS_AS(correct_rate(decide_page(page), partial), ValidationError);
  CHECK(is_word_token("a1"));
  CHECK(is_word_token("\xc3\xa9"));
  CHECK_FALSE(is_word_token(","));
}
