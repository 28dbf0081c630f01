// candsel: command-line front end.
//
// Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 calibration failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "candsel/collocation.hpp"
#include "candsel/constraints.hpp"
#include "candsel/degrade.hpp"
#include "candsel/errors.hpp"
#include "candsel/imaging.hpp"
#include "candsel/parser.hpp"
#include "candsel/pipeline.hpp"
#include "candsel/relaxation.hpp"

namespace {

using namespace candsel;

enum Exit { kOk = 0, kValidation = 1, kIo = 2, kCalibration = 3 };

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw IoError("failed writing " + path);
}

std::string slurp(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TrainArgs {
  std::string corpus, out;
  int window = 2;
};

struct SimulateArgs {
  std::string text, lexicon, confusion, out, relations;
  std::uint64_t seed = 1;
  std::size_t k = kDefaultMaxCandidates;
  double noise = 0.05;
  double type1 = 0.85;
};

struct SelectArgs {
  std::string page, model, grammar, relations, out, trace, log;
  bool constraints = false;
  RelaxParams relax;
  ConstraintParams cons;
};

struct EvaluateArgs {
  std::string config, report;
  std::int64_t seed = -1;
};

struct RenderArgs {
  std::string word, out;
  double noise = 0.0;
  std::uint64_t seed = 1;
};

void run_train(const TrainArgs& a) {
  CollocationModel model =
      CollocationModel::train(tokenize_sentences(slurp(a.corpus)), a.window);
  auto out = open_out(a.out);
  model.save(out);
  finish(out, a.out);
  std::cerr << "trained on " << model.total_tokens() << " tokens, " << model.vocabulary_size()
            << " words, " << model.pair_types() << " pair types\n";
}

void run_simulate(const SimulateArgs& a) {
  auto lex_in = open_in(a.lexicon);
  Lexicon lexicon = read_lexicon(lex_in);
  ConfusionModel channel = ConfusionModel::defaults();
  if (!a.confusion.empty()) {
    auto in = open_in(a.confusion);
    channel = read_confusion_model(in);
  }
  Page page = simulate_page(tokenize_sentences(slurp(a.text)), lexicon, channel, a.k, a.seed);
  auto out = open_out(a.out);
  write_page(out, page);
  finish(out, a.out);
  if (!a.relations.empty()) {
    Rng rng(derive_seed(a.seed, 1));
    std::map<ImageId, Bitmap> bitmaps;
    for (const auto& sentence : page.sentences) {
      for (const auto& set : sentence.positions) {
        const std::string& w = *set.truth();
        if (!is_word_token(w) || !std::all_of(w.begin(), w.end(), has_glyph)) continue;
        bitmaps.emplace(set.image_id(), add_noise(render_word(w), a.noise, rng));
      }
    }
    RelationGraph graph = detect_relations(bitmaps, RelationThresholds::type1_only(a.type1));
    auto rel = open_out(a.relations);
    write_relations(rel, graph);
    finish(rel, a.relations);
  }
}

void run_select(const SelectArgs& a) {
  if (a.constraints && a.relations.empty()) {
    throw ValidationError("--constraints needs --relations");
  }
  auto page_in = open_in(a.page);
  Page page = read_page(page_in);
  auto model_in = open_in(a.model);
  CollocationModel model = CollocationModel::load(model_in);
  LoadedGrammar g = load_grammar_file(a.grammar);
  IntegrateStats stats;
  Page result;
  if (a.constraints) {
    auto rel_in = open_in(a.relations);
    RelationGraph graph = read_relations(rel_in);
    result = integrate(std::move(page), model, graph, a.relax, a.cons, g.grammar, g.lexicon,
                       &stats);
  } else {
    result = relax_and_parse(std::move(page), model, a.relax, g.grammar, g.lexicon, &stats);
  }
  auto out = open_out(a.out);
  write_page(out, result);
  finish(out, a.out);
  if (!a.trace.empty()) {
    auto t = open_out(a.trace);
    write_trace(t, stats.trace);
    finish(t, a.trace);
  }
  if (!a.log.empty()) {
    auto l = open_out(a.log);
    write_constraint_log(l, stats.constraints);
    finish(l, a.log);
  }
  std::cerr << "relaxation rounds " << stats.trace.rounds << ", parsed "
            << stats.select.parsed << "/" << stats.select.sentences << " sentences\n";
}

void run_evaluate(const EvaluateArgs& a) {
  PipelineConfig config = load_config(a.config);
  if (a.seed >= 0) config.seed = static_cast<std::uint64_t>(a.seed);
  PipelineRun run = run_pipeline(config);
  auto out = open_out(a.report);
  write_report(out, run.report);
  finish(out, a.report);
  std::cout << report_table(run.report);
}

void run_render(const RenderArgs& a) {
  Rng rng(a.seed);
  Bitmap b = add_noise(render_word(a.word), a.noise, rng);
  auto out = open_out(a.out);
  write_pbm(out, b);
  finish(out, a.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Candidate selection for degraded word recognition"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Count collocations in a text corpus");
  t->add_option("--corpus", train.corpus, "Training text")->required();
  t->add_option("--out", train.out, "Model file to write")->required();
  t->add_option("--window", train.window, "Largest word distance counted")
      ->capture_default_str()
      ->check(CLI::Range(1, 255));

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Turn text into simulated candidate sets");
  s->add_option("--text", sim.text, "Ground-truth text")->required();
  s->add_option("--lexicon", sim.lexicon, "Lexicon, one word per line")->required();
  s->add_option("--confusion", sim.confusion, "Confusion model file (defaults built in)");
  s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  s->add_option("--k", sim.k, "Candidates per word")->capture_default_str();
  s->add_option("--out", sim.out, "Page file to write")->required();
  s->add_option("--relations", sim.relations, "Also write type-1 relations of noisy renders");
  s->add_option("--noise", sim.noise, "Pixel flip rate for renders")->capture_default_str();
  s->add_option("--type1", sim.type1, "Type-1 similarity threshold")->capture_default_str();

  SelectArgs sel;
  auto* c = app.add_subcommand("select", "Relax, parse and optionally apply visual constraints");
  c->add_option("--page", sel.page, "Page file")->required();
  c->add_option("--model", sel.model, "Collocation model")->required();
  c->add_option("--grammar", sel.grammar, "Grammar with tag lexicon")->required();
  c->add_flag("--constraints", sel.constraints, "Enforce relations from --relations");
  c->add_option("--relations", sel.relations, "Relation file written by simulate");
  c->add_option("--out", sel.out, "Page file to write")->required();
  c->add_option("--alpha", sel.relax.alpha, "Self weight")->capture_default_str();
  c->add_option("--window", sel.relax.window, "Neighbour window (1 or 2)")
      ->capture_default_str();
  c->add_option("--epsilon", sel.relax.epsilon, "Convergence threshold")->capture_default_str();
  c->add_option("--max-iters", sel.relax.max_iters, "Relaxation round limit")
      ->capture_default_str();
  c->add_option("--trace", sel.trace, "Write the relaxation trace here");
  c->add_option("--log", sel.log, "Write the constraint edge log here");

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "Run the three-stage evaluation from a config");
  e->add_option("--config", eval.config, "Config file")->required();
  e->add_option("--report", eval.report, "Report file to write")->required();
  e->add_option("--seed", eval.seed, "Override [run] seed");

  RenderArgs render;
  auto* r = app.add_subcommand("render", "Render a word as a PBM image");
  r->add_option("--word", render.word, "Word")->required();
  r->add_option("--out", render.out, "PBM file to write")->required();
  r->add_option("--noise", render.noise, "Pixel flip rate")->capture_default_str();
  r->add_option("--seed", render.seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kValidation;
  }

  try {
    if (*t) run_train(train);
    if (*s) run_simulate(sim);
    if (*c) run_select(sel);
    if (*e) run_evaluate(eval);
    if (*r) run_render(render);
  } catch (const CalibrationError& err) {
    std::cerr << "calibration failed: " << err.what() << '\n';
    return kCalibration;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  } catch (const ParseError& err) {
    std::cerr << "invalid input: " << err.what() << '\n';
    return kValidation;
  } catch (const ValidationError& err) {
    std::cerr << "invalid input: " << err.what() << '\n';
    return kValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kValidation;
  }
  return kOk;
}
