#pragma once

// End-to-end evaluation: train, simulate, select in three stages, report.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "candsel/constraints.hpp"
#include "candsel/degrade.hpp"
#include "candsel/imaging.hpp"
#include "candsel/relaxation.hpp"

namespace candsel {

struct PipelineConfig {
  // Paths as written; relative ones resolve against base_dir.
  std::filesystem::path base_dir;
  std::string train;
  std::string grammar;
  std::vector<std::pair<std::string, std::string>> articles;  // name, path
  std::string lexicon;    // optional word list; built from the corpora when empty
  std::string confusion;  // optional confusion model file
  std::size_t lexicon_size = 5000;
  std::uint64_t lexicon_seed = 7;

  double target = 0.57;
  double tolerance = 0.03;
  std::size_t calibration_sentences = 400;
  std::size_t k = kDefaultMaxCandidates;
  GeneratorParams generator;

  int max_distance = 2;
  RelaxParams relax;
  ConstraintParams constraints;

  double noise = 0.05;
  double type1 = 0.85;

  std::uint64_t seed = 1;
  bool baseline = true;
  bool relax_stage = true;
  bool constraint_stage = true;
  double max_overlap = 0.2;  // tolerated share of test sentences found in training

  void validate() const;
  std::filesystem::path resolve(const std::string& path) const;
  // Every field in a fixed order, one `key=value` per line.
  std::string canonical() const;
  std::uint64_t hash() const;
};

// INI-style `key = value` lines under [section] headers; see data/desk/desk.cfg.
// Unknown sections or keys are validation errors.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

struct ArticleRow {
  std::string name;
  std::size_t words = 0;
  double baseline = 0.0;
  double relax = 0.0;
  double constraints = 0.0;
};

struct EvaluationReport {
  std::vector<ArticleRow> rows;
  ArticleRow total{"Total"};
  bool baseline = true;
  bool relax_stage = true;
  bool constraint_stage = true;

  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  ConfusionModel channel;
  double calibrated_rate = 0.0;
  int calibration_steps = 0;
  std::size_t sentences = 0;
  std::size_t sentences_parsed = 0;     // stage B
  std::size_t sentences_converged = 0;  // stage B relaxation
  int max_rounds = 0;                   // stage B relaxation, worst article
  std::size_t type1_edges = 0;
  std::size_t clusters = 0;  // type-1 clusters with two or more members
  std::size_t consensus_misses = 0;
  double train_overlap = 0.0;
};

// Word-count weighted totals of the rows.
ArticleRow aggregate(const std::vector<ArticleRow>& rows);

struct ArticleDetail {
  std::string name;
  Page simulated;  // with rendered bitmaps when the constraint stage ran
  Page stage_b;
  Page stage_c;
  RelationGraph graph;
  IntegrateStats stats_b;
  IntegrateStats stats_c;
};

struct PipelineRun {
  EvaluationReport report;
  std::vector<ArticleDetail> details;  // filled when requested
  std::shared_ptr<const CollocationModel> model;  // with the details
};

struct RunOptions {
  bool keep_details = false;
};

// Deterministic in the config (seed included). Articles run in parallel
// with seeds derived from the run seed and the article index.
PipelineRun run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

// Fixed-width table, one row per article plus Total, rates in percent.
std::string report_table(const EvaluationReport& report);

// Table followed by `# key: value` metadata lines.
void write_report(std::ostream& out, const EvaluationReport& report);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace candsel
