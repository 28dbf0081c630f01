#include "candsel/pipeline.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <unordered_set>

#include "candsel/errors.hpp"
#include "candsel/parser.hpp"

namespace candsel {

namespace pt = boost::property_tree;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the pair.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::validate() const {
  if (train.empty()) throw ValidationError("[data] train is required");
  if (grammar.empty()) throw ValidationError("[data] grammar is required");
  if (articles.empty()) throw ValidationError("[articles] must list at least one article");
  std::set<std::string> names;
  for (const auto& [name, path] : articles) {
    if (!names.insert(name).second) throw ValidationError("article '" + name + "' listed twice");
    if (resolve(path) == resolve(train)) {
      throw ValidationError("article '" + name + "' is the training corpus");
    }
  }
  if (lexicon_size < 1) throw ValidationError("[lexicon] size must be >= 1");
  if (!(target > 0.0 && target <= 1.0)) throw ValidationError("[channel] target must be in (0,1]");
  if (!(tolerance >= 0.0)) throw ValidationError("[channel] tolerance must be >= 0");
  if (calibration_sentences < 1) {
    throw ValidationError("[channel] calibration_sentences must be >= 1");
  }
  if (k < 1) throw ValidationError("[channel] k must be >= 1");
  if (max_distance < 1 || max_distance > 255) {
    throw ValidationError("[collocation] max_distance must be in 1..255");
  }
  relax.validate();
  if (relax.window > max_distance) {
    throw ValidationError("[relax] window exceeds [collocation] max_distance");
  }
  constraints.validate();
  if (!(noise >= 0.0 && noise <= 1.0)) throw ValidationError("[imaging] noise must be in [0,1]");
  if (!(type1 > 0.0 && type1 <= 1.0)) throw ValidationError("[imaging] type1 must be in (0,1]");
  if (!(max_overlap >= 0.0 && max_overlap <= 1.0)) {
    throw ValidationError("[run] max_overlap must be in [0,1]");
  }
  if (!baseline && !relax_stage && !constraint_stage) {
    throw ValidationError("[run] stages enables nothing");
  }
}

std::filesystem::path PipelineConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return (p.is_absolute() ? p : base_dir / p).lexically_normal();
}

namespace {

const char* law_name(UpdateLaw law) {
  switch (law) {
    case UpdateLaw::Anchored: return "anchored";
    case UpdateLaw::Reinforce: return "reinforce";
    case UpdateLaw::Blend: return "blend";
  }
  return "anchored";
}

}  // namespace

std::string PipelineConfig::canonical() const {
  std::ostringstream out;
  out.precision(17);
  out << "train=" << train << '\n' << "grammar=" << grammar << '\n';
  for (const auto& [name, path] : articles) out << "article." << name << '=' << path << '\n';
  out << "lexicon=" << lexicon << '\n'
      << "confusion=" << confusion << '\n'
      << "lexicon.size=" << lexicon_size << '\n'
      << "lexicon.seed=" << lexicon_seed << '\n'
      << "channel.target=" << target << '\n'
      << "channel.tolerance=" << tolerance << '\n'
      << "channel.calibration_sentences=" << calibration_sentences << '\n'
      << "channel.k=" << k << '\n'
      << "channel.edit_weight=" << generator.edit_weight << '\n'
      << "channel.channel_weight=" << generator.channel_weight << '\n'
      << "channel.max_edit=" << generator.max_edit << '\n'
      << "collocation.max_distance=" << max_distance << '\n'
      << "relax.alpha=" << relax.alpha << '\n'
      << "relax.window=" << relax.window << '\n'
      << "relax.epsilon=" << relax.epsilon << '\n'
      << "relax.max_iters=" << relax.max_iters << '\n'
      << "relax.prune_floor=" << relax.prune_floor << '\n'
      << "relax.keep_min=" << relax.keep_min << '\n'
      << "relax.support_scale=" << relax.support_scale << '\n'
      << "relax.law=" << law_name(relax.law) << '\n'
      << "constraints.boost=" << constraints.boost << '\n'
      << "constraints.follow_gap=" << constraints.follow_gap << '\n'
      << "constraints.min_length=" << constraints.min_length << '\n'
      << "constraints.vote="
      << (constraints.vote == VoteRule::ConfidenceWeighted ? "confidence" : "majority") << '\n'
      << "imaging.noise=" << noise << '\n'
      << "imaging.type1=" << type1 << '\n'
      << "run.seed=" << seed << '\n'
      << "run.stages=" << baseline << relax_stage << constraint_stage << '\n'
      << "run.max_overlap=" << max_overlap << '\n';
  return out.str();
}

std::uint64_t PipelineConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

class Section {
 public:
  Section(const pt::ptree& tree, std::string name) : name_(std::move(name)) {
    if (auto child = tree.get_child_optional(name_)) tree_ = &*child;
  }

  bool has(const std::string& key) const { return tree_ && tree_->count(key); }

  template <typename T>
  void read(const std::string& key, T& value) {
    seen_.insert(key);
    if (!has(key)) return;
    const std::string text = tree_->get<std::string>(key);
    std::istringstream in(text);
    T parsed{};
    if constexpr (std::is_same_v<T, std::string>) {
      parsed = text;
    } else if (!(in >> parsed) || !(in >> std::ws).eof()) {
      throw ValidationError("[" + name_ + "] " + key + ": cannot read '" + text + "'");
    }
    value = parsed;
  }

  void check_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!seen_.count(key)) throw ValidationError("[" + name_ + "] unknown key '" + key + "'");
    }
  }

 private:
  std::string name_;
  const pt::ptree* tree_ = nullptr;
  std::set<std::string> seen_;
};

std::string lowercase_trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  static const std::set<std::string> known = {"data",  "articles", "lexicon", "channel",
                                              "collocation", "relax", "constraints",
                                              "imaging", "run"};
  for (const auto& [name, child] : tree) {
    if (!known.count(name)) throw ValidationError("unknown config section [" + name + "]");
  }

  PipelineConfig c;
  c.base_dir = base_dir;

  Section data(tree, "data");
  data.read("train", c.train);
  data.read("grammar", c.grammar);
  data.read("lexicon", c.lexicon);
  data.read("confusion", c.confusion);
  data.check_unknown();

  if (auto articles = tree.get_child_optional("articles")) {
    for (const auto& [name, child] : *articles) c.articles.emplace_back(name, child.data());
  }

  Section lexicon(tree, "lexicon");
  lexicon.read("size", c.lexicon_size);
  lexicon.read("seed", c.lexicon_seed);
  lexicon.check_unknown();

  Section channel(tree, "channel");
  channel.read("target", c.target);
  channel.read("tolerance", c.tolerance);
  channel.read("calibration_sentences", c.calibration_sentences);
  channel.read("k", c.k);
  channel.read("edit_weight", c.generator.edit_weight);
  channel.read("channel_weight", c.generator.channel_weight);
  channel.read("max_edit", c.generator.max_edit);
  channel.check_unknown();

  Section colloc(tree, "collocation");
  colloc.read("max_distance", c.max_distance);
  colloc.check_unknown();

  Section relax(tree, "relax");
  relax.read("alpha", c.relax.alpha);
  relax.read("window", c.relax.window);
  relax.read("epsilon", c.relax.epsilon);
  relax.read("max_iters", c.relax.max_iters);
  relax.read("prune_floor", c.relax.prune_floor);
  relax.read("keep_min", c.relax.keep_min);
  relax.read("support_scale", c.relax.support_scale);
  std::string law;
  relax.read("law", law);
  relax.check_unknown();
  if (!law.empty()) {
    law = lowercase_trim(law);
    if (law == "anchored") {
      c.relax.law = UpdateLaw::Anchored;
    } else if (law == "reinforce") {
      c.relax.law = UpdateLaw::Reinforce;
    } else if (law == "blend") {
      c.relax.law = UpdateLaw::Blend;
    } else {
      throw ValidationError("[relax] law must be 'anchored', 'reinforce' or 'blend'");
    }
  }

  Section cons(tree, "constraints");
  cons.read("boost", c.constraints.boost);
  cons.read("follow_gap", c.constraints.follow_gap);
  cons.read("min_length", c.constraints.min_length);
  std::string vote;
  cons.read("vote", vote);
  cons.check_unknown();
  if (!vote.empty()) {
    vote = lowercase_trim(vote);
    if (vote == "confidence") {
      c.constraints.vote = VoteRule::ConfidenceWeighted;
    } else if (vote == "majority") {
      c.constraints.vote = VoteRule::Majority;
    } else {
      throw ValidationError("[constraints] vote must be 'confidence' or 'majority'");
    }
  }

  Section imaging(tree, "imaging");
  imaging.read("noise", c.noise);
  imaging.read("type1", c.type1);
  imaging.check_unknown();

  Section run(tree, "run");
  run.read("seed", c.seed);
  run.read("max_overlap", c.max_overlap);
  std::string stages;
  run.read("stages", stages);
  run.check_unknown();
  if (!stages.empty()) {
    c.baseline = c.relax_stage = c.constraint_stage = false;
    std::stringstream ss(stages);
    for (std::string item; std::getline(ss, item, ',');) {
      item = lowercase_trim(item);
      if (item == "baseline") {
        c.baseline = true;
      } else if (item == "relax") {
        c.relax_stage = true;
      } else if (item == "constraints") {
        c.constraint_stage = true;
      } else if (!item.empty()) {
        throw ValidationError("[run] unknown stage '" + item +
                              "' (expected baseline, relax, constraints)");
      }
    }
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path());
}

// ---------------------------------------------------------------------------
// Run

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sentence_key(const Sentence& s) {
  std::string key;
  for (const auto& w : s) {
    key += w;
    key += ' ';
  }
  return key;
}

Corpus spread_sample(const Corpus& corpus, std::size_t n) {
  if (corpus.size() <= n) return corpus;
  Corpus sample;
  sample.reserve(n);
  for (std::size_t i = 0; i < n; ++i) sample.push_back(corpus[i * corpus.size() / n]);
  return sample;
}

void render_bitmaps(Page& page, double noise, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& sentence : page.sentences) {
    for (const auto& set : sentence.positions) {
      const std::string& word = *set.truth();
      if (!is_word_token(word) ||
          !std::all_of(word.begin(), word.end(), [](char ch) { return has_glyph(ch); })) {
        continue;
      }
      page.bitmaps.emplace(set.image_id(), add_noise(render_word(word), noise, rng));
    }
  }
}

struct ArticleOutcome {
  ArticleRow row;
  ArticleDetail detail;
  std::size_t sentences = 0;
  std::size_t parsed = 0;
  std::size_t converged = 0;
  int rounds = 0;
  std::size_t edges = 0;
  std::size_t clusters = 0;
  std::size_t misses = 0;
};

}  // namespace

ArticleRow aggregate(const std::vector<ArticleRow>& rows) {
  ArticleRow total{"Total"};
  for (const auto& r : rows) total.words += r.words;
  if (total.words == 0) return total;
  for (const auto& r : rows) {
    const double w = static_cast<double>(r.words) / static_cast<double>(total.words);
    total.baseline += w * r.baseline;
    total.relax += w * r.relax;
    total.constraints += w * r.constraints;
  }
  return total;
}

PipelineRun run_pipeline(const PipelineConfig& config, const RunOptions& options) {
  config.validate();

  const Corpus training = tokenize_sentences(read_text(config.resolve(config.train)));
  if (training.empty()) throw ValidationError("training corpus is empty");
  std::vector<Corpus> articles;
  for (const auto& [name, path] : config.articles) {
    articles.push_back(tokenize_sentences(read_text(config.resolve(path))));
    if (articles.back().empty()) throw ValidationError("article '" + name + "' is empty");
  }

  std::unordered_set<std::string> seen;
  for (const auto& s : training) seen.insert(sentence_key(s));
  std::size_t test_sentences = 0;
  std::size_t shared = 0;
  for (const auto& a : articles) {
    for (const auto& s : a) {
      ++test_sentences;
      shared += seen.count(sentence_key(s));
    }
  }
  const double overlap = static_cast<double>(shared) / static_cast<double>(test_sentences);
  if (overlap > config.max_overlap) {
    throw ValidationError("training and test text share " + std::to_string(overlap) +
                          " of the test sentences (limit [run] max_overlap)");
  }

  ConfusionModel channel = ConfusionModel::defaults();
  if (!config.confusion.empty()) {
    std::ifstream in(config.resolve(config.confusion));
    if (!in) throw IoError("cannot open confusion model " + config.confusion);
    channel = read_confusion_model(in);
  }

  Lexicon lexicon({"_"});
  if (!config.lexicon.empty()) {
    std::ifstream in(config.resolve(config.lexicon));
    if (!in) throw IoError("cannot open lexicon " + config.lexicon);
    lexicon = read_lexicon(in);
  } else {
    std::set<std::string> vocab;
    for (const auto& w : vocabulary_of(training)) vocab.insert(w);
    for (const auto& a : articles) {
      for (const auto& w : vocabulary_of(a)) vocab.insert(w);
    }
    lexicon = build_desk_lexicon({vocab.begin(), vocab.end()}, channel, config.lexicon_size,
                                 config.lexicon_seed);
  }

  const auto trained = std::make_shared<const CollocationModel>(
      CollocationModel::train(training, config.max_distance));
  const CollocationModel& model = *trained;
  const LoadedGrammar grammar = load_grammar_file(config.resolve(config.grammar).string());

  const CalibrationResult calibration =
      calibrate(lexicon, channel, spread_sample(training, config.calibration_sentences),
                config.target, config.tolerance, config.k, derive_seed(config.seed, 0),
                config.generator);

  auto run_article = [&](std::size_t index) {
    ArticleOutcome out;
    const std::uint64_t seed = derive_seed(config.seed, index + 1);
    Page page = simulate_page(articles[index], lexicon, calibration.model, config.k, seed, 1,
                              config.generator);
    out.row.name = config.articles[index].first;
    out.row.words = word_truth_of(page).size();
    out.sentences = page.sentences.size();
    if (config.baseline) out.row.baseline = word_correct_rate(page);

    ArticleDetail& d = out.detail;
    d.name = out.row.name;
    if (config.relax_stage) {
      d.stage_b = relax_and_parse(page, model, config.relax, grammar.grammar, grammar.lexicon,
                                  &d.stats_b);
      out.row.relax = word_correct_rate(d.stage_b);
      out.parsed = d.stats_b.select.parsed;
      out.converged = d.stats_b.trace.converged_count();
      out.rounds = d.stats_b.trace.rounds;
    }
    if (config.constraint_stage) {
      render_bitmaps(page, config.noise, derive_seed(seed, 1));
      d.graph = detect_relations(page.bitmaps, RelationThresholds::type1_only(config.type1));
      d.stage_c = integrate(page, model, d.graph, config.relax, config.constraints,
                            grammar.grammar, grammar.lexicon, &d.stats_c);
      out.row.constraints = word_correct_rate(d.stage_c);
      out.edges = d.graph.edges.size();
      out.clusters = static_cast<std::size_t>(
          std::count_if(d.graph.type1_clusters.begin(), d.graph.type1_clusters.end(),
                        [](const Cluster& c) { return c.size() > 1; }));
      out.misses = d.stats_c.constraints.consensus_misses;
    }
    if (options.keep_details) {
      d.simulated = std::move(page);
    } else {
      out.detail = ArticleDetail{};
    }
    return out;
  };

  std::vector<std::future<ArticleOutcome>> futures;
  for (std::size_t i = 0; i < articles.size(); ++i) {
    futures.push_back(std::async(std::launch::async, run_article, i));
  }

  PipelineRun result;
  EvaluationReport& report = result.report;
  report.baseline = config.baseline;
  report.relax_stage = config.relax_stage;
  report.constraint_stage = config.constraint_stage;
  report.seed = config.seed;
  report.config_hash = config.hash();
  report.channel = calibration.model;
  report.calibrated_rate = calibration.achieved;
  report.calibration_steps = calibration.steps;
  report.train_overlap = overlap;
  for (auto& f : futures) {
    ArticleOutcome out = f.get();
    report.rows.push_back(out.row);
    report.sentences += out.sentences;
    report.sentences_parsed += out.parsed;
    report.sentences_converged += out.converged;
    report.max_rounds = std::max(report.max_rounds, out.rounds);
    report.type1_edges += out.edges;
    report.clusters += out.clusters;
    report.consensus_misses += out.misses;
    if (options.keep_details) result.details.push_back(std::move(out.detail));
  }
  report.total = aggregate(report.rows);
  if (options.keep_details) result.model = trained;
  return result;
}

// ---------------------------------------------------------------------------
// Report

namespace {

std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", rate * 100.0);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string report_table(const EvaluationReport& report) {
  std::size_t name_width = 7;
  for (const auto& r : report.rows) name_width = std::max(name_width, r.name.size());
  struct Column {
    std::string title;
    double ArticleRow::*rate;
  };
  std::vector<Column> columns;
  if (report.baseline) columns.push_back({"Baseline", &ArticleRow::baseline});
  if (report.relax_stage) columns.push_back({"Relax+Parse", &ArticleRow::relax});
  if (report.constraint_stage) columns.push_back({"+Constraints", &ArticleRow::constraints});

  std::ostringstream out;
  auto line = [&](const std::string& name, const std::string& words,
                  const std::vector<std::string>& cells) {
    out << pad_right(name, name_width) << "  " << pad_left(words, 7);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << "  " << pad_left(cells[i], std::max<std::size_t>(columns[i].title.size(), 6));
    }
    out << '\n';
  };
  std::vector<std::string> titles;
  for (const auto& c : columns) titles.push_back(c.title);
  line("Article", "Words", titles);
  if (report.rows.empty()) return out.str();
  auto row = [&](const ArticleRow& r) {
    std::vector<std::string> cells;
    for (const auto& c : columns) cells.push_back(percent(r.*(c.rate)));
    line(r.name, std::to_string(r.words), cells);
  };
  for (const auto& r : report.rows) row(r);
  row(report.total);
  return out.str();
}

void write_report(std::ostream& out, const EvaluationReport& report) {
  out << report_table(report);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(report.config_hash));
  out << "\n# seed: " << report.seed << '\n' << "# config_hash: " << buf << '\n';
  std::snprintf(buf, sizeof buf, "sub_rate=%.6f score_noise=%.6f truth_inclusion=%.6f",
                report.channel.sub_rate, report.channel.score_noise,
                report.channel.truth_inclusion);
  out << "# channel: " << buf << '\n';
  std::snprintf(buf, sizeof buf, "achieved=%.4f steps=%d", report.calibrated_rate,
                report.calibration_steps);
  out << "# calibration: " << buf << '\n';
  out << "# sentences: " << report.sentences << '\n';
  if (report.relax_stage) {
    out << "# sentences_parsed: " << report.sentences_parsed << '\n'
        << "# sentences_converged: " << report.sentences_converged << '\n'
        << "# max_relax_rounds: " << report.max_rounds << '\n';
  }
  if (report.constraint_stage) {
    out << "# type1_edges: " << report.type1_edges << '\n'
        << "# type1_clusters: " << report.clusters << '\n'
        << "# consensus_misses: " << report.consensus_misses << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.4f", report.train_overlap);
  out << "# train_overlap: " << buf << '\n';
}

}  // namespace candsel
