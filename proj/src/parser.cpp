#include "candsel/parser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "candsel/errors.hpp"

namespace candsel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kProbTolerance = 1e-6;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

void check_distribution(const TagDistribution& tags, const std::string& owner) {
  if (tags.empty()) throw ValidationError(owner + ": empty tag distribution");
  double total = 0.0;
  std::set<std::string> seen;
  for (const auto& [tag, p] : tags) {
    if (tag.empty()) throw ValidationError(owner + ": empty tag name");
    if (!seen.insert(tag).second) throw ValidationError(owner + ": duplicate tag " + tag);
    if (!(p > 0.0 && p <= 1.0)) throw ValidationError(owner + ": tag probability outside (0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > kProbTolerance) {
    throw ValidationError(owner + ": tag probabilities sum to " + std::to_string(total) +
                          ", not 1");
  }
}

}  // namespace

Grammar::Grammar(std::string start, const std::vector<Rule>& rules,
                 const std::vector<std::string>& tags) {
  for (const auto& t : tags) intern(t, true);
  std::map<std::string, double> mass;
  for (const auto& r : rules) {
    if (ids_.count(r.lhs) && is_tag_[static_cast<std::size_t>(ids_.at(r.lhs))]) {
      throw ValidationError("tag '" + r.lhs + "' cannot appear on a left-hand side");
    }
    intern(r.lhs, false);
    mass[r.lhs];
  }
  if (!ids_.count(start) || is_tag(ids_.at(start))) {
    throw ValidationError("start symbol '" + start + "' has no rules");
  }
  start_ = ids_.at(start);

  std::set<std::tuple<int, int, int>> seen;
  for (const auto& r : rules) {
    const std::string where = "rule " + r.lhs + " ->";
    if (!(r.prob > 0.0 && r.prob <= 1.0)) {
      throw ValidationError(where + ": probability must be in (0,1]");
    }
    auto resolve = [&](const std::string& s) {
      auto it = ids_.find(s);
      if (it == ids_.end()) {
        throw ValidationError(where + ": unknown symbol '" + s +
                              "' (neither a nonterminal nor a lexicon tag)");
      }
      return it->second;
    };
    const int lhs = ids_.at(r.lhs);
    if (r.rhs.size() == 1) {
      int tag = resolve(r.rhs[0]);
      if (!is_tag(tag)) {
        throw ValidationError(where + " " + r.rhs[0] +
                              ": unit rules between nonterminals are not supported; "
                              "use A -> B C or A -> Tag");
      }
      if (!seen.insert({lhs, tag, -1}).second) throw ValidationError(where + ": duplicate rule");
      unary_.push_back({lhs, tag, std::log(r.prob)});
    } else if (r.rhs.size() == 2) {
      int b = resolve(r.rhs[0]);
      int c = resolve(r.rhs[1]);
      if (!seen.insert({lhs, b, c}).second) throw ValidationError(where + ": duplicate rule");
      binary_.push_back({lhs, b, c, std::log(r.prob)});
    } else {
      throw ValidationError(where + ": " + std::to_string(r.rhs.size()) +
                            " right-hand symbols; the grammar must be in Chomsky normal form "
                            "(A -> B C or A -> Tag), binarize longer rules");
    }
    mass[r.lhs] += r.prob;
  }
  for (const auto& [lhs, total] : mass) {
    if (std::abs(total - 1.0) > kProbTolerance) {
      throw ValidationError("rules for " + lhs + " sum to " + std::to_string(total) +
                            ", not 1");
    }
  }
}

int Grammar::intern(const std::string& name, bool tag) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  int id = static_cast<int>(symbols_.size());
  symbols_.push_back(name);
  is_tag_.push_back(tag);
  ids_.emplace(name, id);
  return id;
}

int Grammar::find(std::string_view name) const {
  auto it = ids_.find(name);
  return it == ids_.end() ? -1 : it->second;
}

TagLexicon::TagLexicon() : unknown_{{"Adj", 1.0 / 3}, {"N", 1.0 / 3}, {"V", 1.0 / 3}} {}

void TagLexicon::add(std::string word, TagDistribution tags) {
  if (word.empty()) throw ValidationError("empty word in tag lexicon");
  check_distribution(tags, "word '" + word + "'");
  if (!entries_.emplace(std::move(word), std::move(tags)).second) {
    throw ValidationError("word listed twice in tag lexicon");
  }
}

void TagLexicon::set_unknown(TagDistribution tags) {
  check_distribution(tags, "unknown-word distribution");
  unknown_ = std::move(tags);
}

const TagDistribution& TagLexicon::tags(std::string_view word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? unknown_ : it->second;
}

bool TagLexicon::known(std::string_view word) const { return entries_.find(word) != entries_.end(); }

std::vector<std::string> TagLexicon::tag_names() const {
  std::set<std::string> names;
  for (const auto& [t, p] : unknown_) names.insert(t);
  for (const auto& [w, dist] : entries_) {
    for (const auto& [t, p] : dist) names.insert(t);
  }
  return {names.begin(), names.end()};
}

namespace {

TagDistribution parse_distribution(const std::string& text, std::size_t line_no) {
  TagDistribution out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw ParseError("expected tag:prob, got '" + item + "'", line_no);
    }
    try {
      std::size_t used = 0;
      std::string num = item.substr(colon + 1);
      double p = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument(num);
      out.emplace_back(item.substr(0, colon), p);
    } catch (const std::exception&) {
      throw ParseError("bad probability in '" + item + "'", line_no);
    }
  }
  return out;
}

}  // namespace

LoadedGrammar load_grammar(std::istream& in) {
  std::string start;
  std::vector<Rule> rules;
  TagLexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      auto tab = line.find('\t');
      if (tab != std::string::npos) {
        lexicon.add(line.substr(0, tab), parse_distribution(line.substr(tab + 1), line_no));
        continue;
      }
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      if (tokens.empty()) continue;
      if (tokens[0] == "start") {
        if (tokens.size() != 2) throw ParseError("expected 'start SYMBOL'", line_no);
        if (!start.empty()) throw ParseError("start symbol declared twice", line_no);
        start = tokens[1];
      } else if (tokens[0] == "@unknown") {
        if (tokens.size() != 2) throw ParseError("expected '@unknown tag:prob,...'", line_no);
        lexicon.set_unknown(parse_distribution(tokens[1], line_no));
      } else if (tokens.size() >= 3 && tokens[1] == "->") {
        Rule r;
        r.lhs = tokens[0];
        r.rhs.assign(tokens.begin() + 2, tokens.end() - 1);
        try {
          std::size_t used = 0;
          r.prob = std::stod(tokens.back(), &used);
          if (used != tokens.back().size()) throw std::invalid_argument(tokens.back());
        } catch (const std::exception&) {
          throw ParseError("rule must end with its probability", line_no);
        }
        if (r.rhs.empty()) throw ParseError("rule has no right-hand side", line_no);
        if (r.rhs.size() > 2) {
          throw ParseError("rule has " + std::to_string(r.rhs.size()) +
                               " right-hand symbols; the grammar must be in Chomsky normal "
                               "form (A -> B C or A -> Tag), binarize longer rules",
                           line_no);
        }
        rules.push_back(std::move(r));
      } else {
        throw ParseError("expected a rule 'A -> B C prob', 'start S' or 'word TAB tag:prob'",
                         line_no);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (start.empty()) throw ValidationError("grammar declares no start symbol");
  Grammar grammar(start, rules, lexicon.tag_names());
  return {std::move(grammar), std::move(lexicon)};
}

LoadedGrammar load_grammar_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grammar file " + path);
  return load_grammar(in);
}

namespace {

struct Cell {
  double vit = kNegInf;
  double inside = kNegInf;
  int split = -1;  // binary: split point; unary: -2; leaf tag: -3
  int left = -1;   // binary: left symbol; unary: tag symbol
  int right = -1;
  std::size_t candidate = 0;
};

class Chart {
 public:
  Chart(const SentenceLattice& sentence, const Grammar& grammar, const TagLexicon& lexicon)
      : n_(sentence.positions.size()), s_(grammar.symbol_count()),
        cells_((n_ + 1) * (n_ + 1) * s_) {
    if (n_ == 0) throw ValidationError("cannot parse an empty sentence");
    for (std::size_t i = 0; i < n_; ++i) {
      const auto cands = sentence.positions[i].candidates();
      for (std::size_t c = 0; c < cands.size(); ++c) {
        if (cands[c].score <= 0.0) continue;
        const double ls = std::log(cands[c].score);
        for (const auto& [tag, p] : lexicon.tags(cands[c].word)) {
          int t = grammar.find(tag);
          if (t < 0) continue;
          Cell& cell = cell_at(i, i + 1, t);
          double v = ls + std::log(p);
          cell.inside = log_add(cell.inside, v);
          if (v > cell.vit) {
            cell.vit = v;
            cell.split = -3;
            cell.candidate = c;
          }
        }
      }
      for (const auto& u : grammar.unary()) {
        const Cell& tag = at(i, i + 1, u.tag);
        if (tag.vit == kNegInf) continue;
        Cell& cell = cell_at(i, i + 1, u.lhs);
        cell.inside = log_add(cell.inside, u.log_prob + tag.inside);
        double v = u.log_prob + tag.vit;
        if (v > cell.vit) {
          cell.vit = v;
          cell.split = -2;
          cell.left = u.tag;
        }
      }
    }
    for (std::size_t len = 2; len <= n_; ++len) {
      for (std::size_t i = 0; i + len <= n_; ++i) {
        const std::size_t j = i + len;
        for (std::size_t k = i + 1; k < j; ++k) {
          for (const auto& r : grammar.binary()) {
            const Cell& b = at(i, k, r.left);
            if (b.vit == kNegInf) continue;
            const Cell& c = at(k, j, r.right);
            if (c.vit == kNegInf) continue;
            Cell& cell = cell_at(i, j, r.lhs);
            cell.inside = log_add(cell.inside, r.log_prob + b.inside + c.inside);
            double v = r.log_prob + b.vit + c.vit;
            if (v > cell.vit) {
              cell.vit = v;
              cell.split = static_cast<int>(k);
              cell.left = r.left;
              cell.right = r.right;
            }
          }
        }
      }
    }
  }

  const Cell& at(std::size_t i, std::size_t j, int sym) const {
    return cells_[(i * (n_ + 1) + j) * s_ + static_cast<std::size_t>(sym)];
  }
  std::size_t size() const { return n_; }

 private:
  Cell& cell_at(std::size_t i, std::size_t j, int sym) {
    return cells_[(i * (n_ + 1) + j) * s_ + static_cast<std::size_t>(sym)];
  }

  std::size_t n_;
  std::size_t s_;
  std::vector<Cell> cells_;
};

int build_tree(const Chart& chart, std::size_t i, std::size_t j, int sym,
               std::vector<ParseNode>& nodes) {
  const Cell& cell = chart.at(i, j, sym);
  int index = static_cast<int>(nodes.size());
  nodes.push_back({sym, -1, -1, i, 0});
  if (cell.split == -3) {
    nodes[static_cast<std::size_t>(index)].candidate = cell.candidate;
  } else if (cell.split == -2) {
    int child = build_tree(chart, i, j, cell.left, nodes);
    nodes[static_cast<std::size_t>(index)].left = child;
  } else {
    const auto k = static_cast<std::size_t>(cell.split);
    int l = build_tree(chart, i, k, cell.left, nodes);
    int r = build_tree(chart, k, j, cell.right, nodes);
    nodes[static_cast<std::size_t>(index)].left = l;
    nodes[static_cast<std::size_t>(index)].right = r;
  }
  return index;
}

}  // namespace

ParseResult parse_lattice(const SentenceLattice& sentence, const Grammar& grammar,
                          const TagLexicon& lexicon) {
  Chart chart(sentence, grammar, lexicon);
  const std::size_t n = chart.size();
  ParseResult result;
  const Cell& root = chart.at(0, n, grammar.start());
  if (root.vit == kNegInf) return result;
  result.parsed = true;
  result.log_score = root.vit;
  build_tree(chart, 0, n, grammar.start(), result.nodes);
  result.selections.resize(n);
  for (const auto& node : result.nodes) {
    if (node.left < 0) {
      result.selections[node.position] =
          sentence.positions[node.position][node.candidate].word;
    }
  }
  return result;
}

double inside_probability(const SentenceLattice& sentence, const Grammar& grammar,
                          const TagLexicon& lexicon) {
  Chart chart(sentence, grammar, lexicon);
  return std::exp(chart.at(0, chart.size(), grammar.start()).inside);
}

double derivation_log_score(const ParseResult& result, const SentenceLattice& sentence,
                            const Grammar& grammar, const TagLexicon& lexicon) {
  if (!result.parsed) return kNegInf;
  std::map<std::tuple<int, int, int>, double> rule;
  for (const auto& b : grammar.binary()) rule[{b.lhs, b.left, b.right}] = b.log_prob;
  for (const auto& u : grammar.unary()) rule[{u.lhs, u.tag, -1}] = u.log_prob;

  auto score = [&](auto&& self, int index) -> double {
    const ParseNode& node = result.nodes.at(static_cast<std::size_t>(index));
    if (node.left < 0) {
      const Candidate& c = sentence.positions.at(node.position)[node.candidate];
      for (const auto& [tag, p] : lexicon.tags(c.word)) {
        if (tag == grammar.name(node.symbol)) return std::log(c.score) + std::log(p);
      }
      throw ValidationError("tree leaf uses a tag its word does not carry");
    }
    const int l = result.nodes[static_cast<std::size_t>(node.left)].symbol;
    const int r =
        node.right < 0 ? -1 : result.nodes[static_cast<std::size_t>(node.right)].symbol;
    auto it = rule.find({node.symbol, l, r});
    if (it == rule.end()) throw ValidationError("tree uses a rule missing from the grammar");
    double s = it->second + self(self, node.left);
    if (node.right >= 0) s += self(self, node.right);
    return s;
  };
  return score(score, 0);
}

std::string ParseResult::tree(const Grammar& grammar, const SentenceLattice& sentence) const {
  if (!parsed) return "";
  auto render = [&](auto&& self, int index) -> std::string {
    const ParseNode& node = nodes[static_cast<std::size_t>(index)];
    std::string out = "(" + grammar.name(node.symbol) + " ";
    if (node.left < 0) {
      out += sentence.positions[node.position][node.candidate].word;
    } else {
      out += self(self, node.left);
      if (node.right >= 0) out += " " + self(self, node.right);
    }
    return out + ")";
  };
  return render(render, 0);
}

bool promote(CandidateSet& set, std::string_view word, double delta) {
  auto index = set.find(word);
  if (!index) return false;
  if (*index == 0) return true;
  const auto cands = set.candidates();
  std::vector<double> weights;
  weights.reserve(cands.size());
  for (const auto& c : cands) weights.push_back(c.score);
  weights[*index] = cands[0].score + delta;
  set.reweight(weights);
  return true;
}

Page select_by_parse(Page page, const Grammar& grammar, const TagLexicon& lexicon,
                     SelectStats* stats) {
  SelectStats local;
  for (auto& sentence : page.sentences) {
    ++local.sentences;
    ParseResult result = parse_lattice(sentence, grammar, lexicon);
    if (!result.parsed) continue;
    ++local.parsed;
    for (std::size_t i = 0; i < sentence.positions.size(); ++i) {
      promote(sentence.positions[i], result.selections[i]);
    }
  }
  if (stats) *stats = local;
  return page;
}

}  // namespace candsel
