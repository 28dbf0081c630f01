#include "candsel/errors.hpp"
#include "candsel/pipeline.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

using namespace candsel;

#ifndef CANDSEL_DATA_DIR
#error "CANDSEL_DATA_DIR must name the data directory"
#endif

namespace {

const std::filesystem::path kDesk = std::filesystem::path(CANDSEL_DATA_DIR) / "desk";

PipelineConfig config_from(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, kDesk);
}

// One article, fewer calibration sentences.
const char* kSmall =
    "[data]\ntrain = train.txt\ngrammar = desk.grammar\n"
    "[articles]\ngarden = a05_garden.txt\n"
    "[channel]\ncalibration_sentences = 150\n"
    "[relax]\nwindow = 2\n"
    "[imaging]\nnoise = 0.0\ntype1 = 1.0\n"
    "[run]\nseed = 3\n";

}  // namespace

TEST_CASE("config parsing") {
  PipelineConfig c = load_config(kDesk / "desk.cfg");
  CHECK(c.articles.size() == 5);
  CHECK(c.articles[0].first == "office");
  CHECK(c.relax.window == 2);
  CHECK(c.relax.law == UpdateLaw::Anchored);
  CHECK(c.type1 == 1.0);
  CHECK(c.seed == 1);
  CHECK(c.resolve(c.train) == kDesk / "train.txt");
  CHECK(std::filesystem::exists(c.resolve(c.grammar)));

  PipelineConfig s = config_from(kSmall);
  CHECK(s.calibration_sentences == 150);
  CHECK(s.constraint_stage);

  CHECK_THROWS_AS(config_from("[data]\ntrain = t\ngrammar = g\nbogus = 1\n[articles]\na = b\n"),
                  ValidationError);
  CHECK_THROWS_AS(config_from("[nope]\nx = 1\n"), ValidationError);
  CHECK_THROWS_AS(config_from(std::string(kSmall) + "[relax]\nalpha = 2\n"), ValidationError);
  CHECK_THROWS_AS(config_from("[data]\ngrammar = g\n[articles]\na = b\n"), ValidationError);
  CHECK_THROWS_AS(config_from("[data]\ntrain = t\ngrammar = g\n"), ValidationError);
  CHECK_THROWS_AS(load_config(kDesk / "missing.cfg"), IoError);
}

TEST_CASE("stage lists and enumerations") {
  PipelineConfig c = config_from(std::string(kSmall) +
                                 "[constraints]\nvote = majority\n");
  CHECK(c.constraints.vote == VoteRule::Majority);
  std::string text = kSmall;
  text.replace(text.find("seed = 3"), 8, "seed = 3\nstages = baseline, relax");
  c = config_from(text);
  CHECK(c.baseline);
  CHECK(c.relax_stage);
  CHECK_FALSE(c.constraint_stage);
  text.replace(text.find("baseline, relax"), 15, "baseline, flight");
  CHECK_THROWS_AS(config_from(text), ValidationError);
}

TEST_CASE("config hash follows the canonical form") {
  PipelineConfig a = config_from(kSmall);
  PipelineConfig b = config_from(kSmall);
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  b.seed = 4;
  CHECK(a.hash() != b.hash());
  b = a;
  b.relax.alpha = 0.71;
  CHECK(a.canonical() != b.canonical());
}

TEST_CASE("derived seeds differ per stream") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s) seen.insert(derive_seed(1, s));
  CHECK(seen.size() == 50);
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("report table layout") {
  EvaluationReport r;
  r.rows = {{"office", 2000, 0.5, 0.8, 0.9}, {"farm", 1000, 0.6, 0.7, 0.75}};
  r.total = aggregate(r.rows);
  CHECK(r.total.words == 3000);
  CHECK(r.total.baseline == doctest::Approx((0.5 * 2000 + 0.6 * 1000) / 3000));
  const std::string table = report_table(r);
  CHECK(table ==
        "Article    Words  Baseline  Relax+Parse  +Constraints\n"
        "office      2000     50.00        80.00         90.00\n"
        "farm        1000     60.00        70.00         75.00\n"
        "Total       3000     53.33        76.67         85.00\n");
  r.constraint_stage = false;
  CHECK(report_table(r).find("+Constraints") == std::string::npos);
  EvaluationReport empty;
  CHECK(report_table(empty) == "Article    Words  Baseline  Relax+Parse  +Constraints\n");
}

TEST_CASE("small run is deterministic and relaxation beats the baseline") {
  PipelineConfig c = config_from(kSmall);
  PipelineRun first = run_pipeline(c, {true});
  PipelineRun second = run_pipeline(c);
  std::ostringstream a;
  std::ostringstream b;
  write_report(a, first.report);
  write_report(b, second.report);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("# seed: 3") != std::string::npos);

  const EvaluationReport& r = first.report;
  REQUIRE(r.rows.size() == 1);
  CHECK(r.calibrated_rate >= 0.54);
  CHECK(r.calibrated_rate <= 0.60);
  CHECK(r.rows[0].relax > r.rows[0].baseline);
  REQUIRE(first.details.size() == 1);
  REQUIRE(first.model);
  CHECK(word_correct_rate(first.details[0].stage_c) == r.rows[0].constraints);
  CHECK(first.details[0].graph.edges.size() == r.type1_edges);
  CHECK(second.details.empty());
}

TEST_CASE("heavy overlap between training and test text is refused") {
  std::string text = kSmall;
  text.replace(text.find("a05_garden.txt"), 14, "train.txt");
  CHECK_THROWS_AS(run_pipeline(config_from(text)), ValidationError);
}
