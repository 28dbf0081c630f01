#include "candsel/degrade.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "candsel/errors.hpp"

namespace candsel {

// ---------------------------------------------------------------------------
// Confusion model

ConfusionModel ConfusionModel::defaults() {
  ConfusionModel m;
  m.classes = {{"f", "t"}, {"o", "a", "e", "c"}, {"l", "i", "1", "I"},
               {"m", "rn"}, {"n", "h"},           {"u", "v"}};
  return m;
}

void ConfusionModel::validate() const {
  if (!(sub_rate >= 0.0 && sub_rate <= 1.0)) {
    throw ValidationError("sub_rate must be in [0,1]");
  }
  if (!(truth_inclusion > 0.0 && truth_inclusion <= 1.0)) {
    throw ValidationError("truth_inclusion must be in (0,1]");
  }
  if (!(score_noise >= 0.0) || !std::isfinite(score_noise)) {
    throw ValidationError("score_noise must be >= 0");
  }
  for (const auto& cls : classes) {
    if (cls.size() < 2) throw ValidationError("a confusion class needs at least two members");
    for (const auto& member : cls) {
      if (member.empty()) throw ValidationError("empty confusion class member");
    }
  }
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& text, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("bad number '" + text + "'", line_no);
  }
  return v;
}

// Class members matched longest-first at a given position.
struct ChannelIndex {
  struct Member {
    std::string text;
    std::size_t cls;
  };
  std::vector<Member> members;  // longest first
  const ConfusionModel* model;

  explicit ChannelIndex(const ConfusionModel& m) : model(&m) {
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
      for (const auto& text : m.classes[c]) members.push_back({text, c});
    }
    std::stable_sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
      return a.text.size() > b.text.size();
    });
  }

  const Member* match(std::string_view word, std::size_t pos) const {
    for (const auto& m : members) {
      if (word.compare(pos, m.text.size(), m.text) == 0) return &m;
    }
    return nullptr;
  }

  bool classmates(std::string_view a, std::string_view b) const {
    for (const auto& cls : model->classes) {
      bool ha = std::find(cls.begin(), cls.end(), a) != cls.end();
      bool hb = std::find(cls.begin(), cls.end(), b) != cls.end();
      if (ha && hb) return true;
    }
    return false;
  }
};

bool has_word_char(std::string_view s) { return is_word_token(s); }

}  // namespace

ConfusionModel read_confusion_model(std::istream& in) {
  ConfusionModel model = ConfusionModel::defaults();
  std::vector<std::vector<std::string>> classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    auto eq = text.find('=');
    if (eq != std::string::npos) {
      std::string key = trim(std::string_view(text).substr(0, eq));
      std::string value = trim(std::string_view(text).substr(eq + 1));
      if (key == "sub_rate") {
        model.sub_rate = parse_real(value, line_no);
      } else if (key == "truth_inclusion") {
        model.truth_inclusion = parse_real(value, line_no);
      } else if (key == "score_noise") {
        model.score_noise = parse_real(value, line_no);
      } else {
        throw ParseError("unknown key '" + key + "'", line_no);
      }
      continue;
    }
    std::istringstream members(text);
    std::vector<std::string> cls;
    for (std::string m; members >> m;) cls.push_back(m);
    if (cls.size() < 2) throw ParseError("confusion class needs two members", line_no);
    classes.push_back(std::move(cls));
  }
  if (!classes.empty()) model.classes = std::move(classes);
  try {
    model.validate();
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line_no);
  }
  return model;
}

void write_confusion_model(std::ostream& out, const ConfusionModel& model) {
  for (const auto& cls : model.classes) {
    for (std::size_t i = 0; i < cls.size(); ++i) out << (i ? " " : "") << cls[i];
    out << '\n';
  }
  auto old = out.precision(17);
  out << "sub_rate=" << model.sub_rate << '\n'
      << "truth_inclusion=" << model.truth_inclusion << '\n'
      << "score_noise=" << model.score_noise << '\n';
  out.precision(old);
}

// ---------------------------------------------------------------------------
// Distances

std::size_t edit_distance(std::string_view a, std::string_view b) {
  thread_local std::vector<std::size_t> prev, cur;
  prev.resize(b.size() + 1);
  cur.resize(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double channel_cost(std::string_view candidate, std::string_view observed,
                    const ConfusionModel& model) {
  ChannelIndex index(model);
  const std::size_t n = candidate.size();
  const std::size_t m = observed.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(m + 1, inf));
  cost[0][0] = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      double here = cost[i][j];
      if (here == inf) continue;
      if (i < n) cost[i + 1][j] = std::min(cost[i + 1][j], here + 1.0);
      if (j < m) cost[i][j + 1] = std::min(cost[i][j + 1], here + 1.0);
      if (i < n && j < m) {
        double c = candidate[i] == observed[j] ? 0.0 : 1.0;
        cost[i + 1][j + 1] = std::min(cost[i + 1][j + 1], here + c);
      }
      // Classmate substitutions, including multi-character members.
      for (const auto& x : index.members) {
        if (candidate.compare(i, x.text.size(), x.text) != 0) continue;
        for (const auto& y : model.classes[x.cls]) {
          if (y == x.text || observed.compare(j, y.size(), y) != 0) continue;
          double& target = cost[i + x.text.size()][j + y.size()];
          target = std::min(target, here);
        }
      }
    }
  }
  return cost[n][m];
}

// ---------------------------------------------------------------------------
// Lexicon

struct Lexicon::Node {
  std::size_t word;
  std::vector<std::pair<std::size_t, std::unique_ptr<Node>>> children;
};

Lexicon::Lexicon(std::vector<std::string> words) : words_(std::move(words)) {
  std::sort(words_.begin(), words_.end());
  words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
  if (words_.empty()) throw ValidationError("lexicon is empty");
  for (const auto& w : words_) {
    if (w.empty()) throw ValidationError("lexicon contains an empty word");
  }
  root_ = std::make_unique<Node>(Node{0, {}});
  for (std::size_t i = 1; i < words_.size(); ++i) {
    Node* node = root_.get();
    while (true) {
      std::size_t d = edit_distance(words_[i], words_[node->word]);
      auto it = std::find_if(node->children.begin(), node->children.end(),
                             [d](const auto& c) { return c.first == d; });
      if (it == node->children.end()) {
        node->children.emplace_back(d, std::make_unique<Node>(Node{i, {}}));
        break;
      }
      node = it->second.get();
    }
  }
}

Lexicon::Lexicon(Lexicon&&) noexcept = default;
Lexicon& Lexicon::operator=(Lexicon&&) noexcept = default;
Lexicon::~Lexicon() = default;

bool Lexicon::contains(std::string_view word) const {
  return std::binary_search(words_.begin(), words_.end(), word);
}

std::vector<std::string> Lexicon::lookup(std::string_view query,
                                         std::size_t max_distance) const {
  std::vector<std::string> found;
  std::vector<const Node*> stack{root_.get()};
  while (!stack.empty()) {
    const Node* node = stack.back();
    stack.pop_back();
    std::size_t d = edit_distance(query, words_[node->word]);
    if (d <= max_distance) found.push_back(words_[node->word]);
    for (const auto& [dist, child] : node->children) {
      if (dist + max_distance >= d && dist <= d + max_distance) stack.push_back(child.get());
    }
  }
  std::sort(found.begin(), found.end());
  return found;
}

Lexicon read_lexicon(std::istream& in) {
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::string w = trim(line);
    if (!w.empty()) words.push_back(std::move(w));
  }
  return Lexicon(std::move(words));
}

void write_lexicon(std::ostream& out, const Lexicon& lexicon) {
  for (const auto& w : lexicon.words()) out << w << '\n';
}

std::vector<std::string> vocabulary_of(const Corpus& corpus) {
  std::set<std::string> vocab;
  for (const auto& s : corpus) vocab.insert(s.begin(), s.end());
  return {vocab.begin(), vocab.end()};
}

namespace {

// All strings reachable from `word` by substituting exactly one class member.
std::vector<std::string> single_variants(const std::string& word, const ChannelIndex& index) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < word.size()) {
    const auto* m = index.match(word, pos);
    if (!m) {
      ++pos;
      continue;
    }
    for (const auto& mate : index.model->classes[m->cls]) {
      if (mate == m->text) continue;
      out.push_back(word.substr(0, pos) + mate + word.substr(pos + m->text.size()));
    }
    pos += m->text.size();
  }
  return out;
}

}  // namespace

Lexicon build_desk_lexicon(const std::vector<std::string>& vocabulary,
                           const ConfusionModel& model, std::size_t target_size,
                           std::uint64_t seed) {
  ChannelIndex index(model);
  std::set<std::string> words;
  std::vector<std::string> base;
  for (const auto& w : vocabulary) {
    if (has_word_char(w) && words.insert(w).second) base.push_back(w);
  }
  std::sort(base.begin(), base.end());
  Rng rng(seed);

  auto add_from = [&](std::vector<std::string> pool) {
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    std::shuffle(pool.begin(), pool.end(), rng);
    for (auto& w : pool) {
      if (words.size() >= target_size) return;
      words.insert(std::move(w));
    }
  };

  std::vector<std::string> singles;
  for (const auto& w : base) {
    for (auto& v : single_variants(w, index)) singles.push_back(std::move(v));
  }
  add_from(singles);
  if (words.size() < target_size) {
    std::vector<std::string> doubles;
    for (const auto& w : base) {
      for (const auto& v : single_variants(w, index)) {
        for (auto& v2 : single_variants(v, index)) {
          if (v2 != w) doubles.push_back(std::move(v2));
        }
      }
    }
    add_from(doubles);
  }
  return Lexicon({words.begin(), words.end()});
}

// ---------------------------------------------------------------------------
// Channel and generator

std::string corrupt_word(std::string_view word, const ConfusionModel& model, Rng& rng) {
  ChannelIndex index(model);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::string out;
  std::size_t pos = 0;
  while (pos < word.size()) {
    const auto* m = index.match(word, pos);
    if (!m) {
      out.push_back(word[pos++]);
      continue;
    }
    const auto& cls = model.classes[m->cls];
    if (unit(rng) < model.sub_rate) {
      std::vector<const std::string*> mates;
      for (const auto& mate : cls) {
        if (mate != m->text) mates.push_back(&mate);
      }
      std::uniform_int_distribution<std::size_t> pick(0, mates.size() - 1);
      out += *mates[pick(rng)];
    } else {
      out += m->text;
    }
    pos += m->text.size();
  }
  return out;
}

namespace {

// Noise-free retrieval for one observed string: the words found at the
// first non-empty radius with their deterministic log scores.
struct Retrieval {
  std::size_t radius = 0;
  std::vector<std::pair<std::string, double>> words;
};
using RetrievalCache = std::map<std::string, Retrieval, std::less<>>;

double base_score(const std::string& w, const std::string& observed,
                  const ConfusionModel& model, const GeneratorParams& params) {
  return -params.edit_weight * static_cast<double>(edit_distance(w, observed)) -
         params.channel_weight * channel_cost(w, observed, model);
}

Retrieval retrieve(const std::string& observed, const Lexicon& lexicon,
                   const ConfusionModel& model, const GeneratorParams& params) {
  Retrieval r;
  r.radius = params.max_edit;
  std::vector<std::string> found = lexicon.lookup(observed, r.radius);
  while (found.empty()) found = lexicon.lookup(observed, ++r.radius);
  r.words.reserve(found.size());
  for (auto& w : found) {
    double s = base_score(w, observed, model, params);
    r.words.emplace_back(std::move(w), s);
  }
  return r;
}

CandidateSet generate(ImageId image_id, const std::string& truth, const Lexicon& lexicon,
                      const ConfusionModel& model, std::size_t k, Rng& rng,
                      const GeneratorParams& params, RetrievalCache* cache) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (!lexicon.contains(truth)) {
    throw ValidationError("true word '" + truth + "' is not in the lexicon");
  }
  std::string observed = corrupt_word(truth, model, rng);

  Retrieval local;
  const Retrieval* found = nullptr;
  if (cache) {
    auto it = cache->find(observed);
    if (it == cache->end()) {
      it = cache->emplace(observed, retrieve(observed, lexicon, model, params)).first;
    }
    found = &it->second;
  } else {
    local = retrieve(observed, lexicon, model, params);
    found = &local;
  }
  const std::size_t radius = found->radius;

  std::normal_distribution<double> noise(0.0, 1.0);
  auto noisy = [&](double base) { return base + model.score_noise * noise(rng); };

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(found->words.size());
  for (const auto& [w, base] : found->words) scored.emplace_back(w, noisy(base));
  auto log_score = [&](const std::string& w) {
    return noisy(base_score(w, observed, model, params));
  };
  auto by_score = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  std::sort(scored.begin(), scored.end(), by_score);
  if (scored.size() > k) scored.resize(k);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool include = unit(rng) < model.truth_inclusion;
  auto has_truth = [&] {
    return std::find_if(scored.begin(), scored.end(),
                        [&](const auto& e) { return e.first == truth; });
  };
  auto it = has_truth();
  if (include && it == scored.end()) {
    double s = log_score(truth);
    if (scored.size() == k) scored.pop_back();
    scored.emplace_back(truth, s);
    std::sort(scored.begin(), scored.end(), by_score);
  } else if (!include && it != scored.end()) {
    scored.erase(it);
    // Replace the removed truth by the next-nearest lexicon words so the set
    // is never empty; a lexicon holding only the truth keeps it.
    std::size_t r = radius;
    const std::size_t limit = observed.size() + truth.size() + 2;
    while (scored.empty() && r <= limit) {
      for (auto& w : lexicon.lookup(observed, r)) {
        if (w != truth) {
          double s = log_score(w);
          scored.emplace_back(std::move(w), s);
        }
      }
      ++r;
    }
    if (scored.empty()) scored.emplace_back(truth, 0.0);
    std::sort(scored.begin(), scored.end(), by_score);
    if (scored.size() > k) scored.resize(k);
  }

  double best = scored.front().second;
  std::vector<CandidateSet::Entry> entries;
  double total = 0.0;
  for (const auto& [w, s] : scored) total += std::exp(s - best);
  for (auto& [w, s] : scored) entries.emplace_back(std::move(w), std::exp(s - best) / total);
  return CandidateSet(image_id, std::move(entries), truth, k);
}

}  // namespace

CandidateSet generate_candidate_set(ImageId image_id, const std::string& truth,
                                    const Lexicon& lexicon, const ConfusionModel& model,
                                    std::size_t k, Rng& rng, const GeneratorParams& params) {
  model.validate();
  return generate(image_id, truth, lexicon, model, k, rng, params, nullptr);
}

Page simulate_page(const Corpus& sentences, const Lexicon& lexicon,
                   const ConfusionModel& model, std::size_t k, std::uint64_t seed,
                   ImageId first_id, const GeneratorParams& params) {
  model.validate();
  Page page;
  RetrievalCache cache;
  ImageId id = first_id;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].empty()) continue;
    Rng rng(seed ^ static_cast<std::uint64_t>(i));
    SentenceLattice lattice;
    for (const auto& token : sentences[i]) {
      if (!has_word_char(token) || !lexicon.contains(token)) {
        lattice.positions.emplace_back(id++, std::vector<CandidateSet::Entry>{{token, 1.0}},
                                       token);
      } else {
        lattice.positions.push_back(
            generate(id++, token, lexicon, model, k, rng, params, &cache));
      }
    }
    page.sentences.push_back(std::move(lattice));
  }
  return page;
}

double simulated_top1(const Corpus& sample, const Lexicon& lexicon,
                      const ConfusionModel& model, std::size_t k, std::uint64_t seed,
                      const GeneratorParams& params) {
  return word_correct_rate(simulate_page(sample, lexicon, model, k, seed, 1, params));
}

CalibrationResult calibrate(const Lexicon& lexicon, const ConfusionModel& model,
                            const Corpus& sample, double target, double tolerance,
                            std::size_t k, std::uint64_t seed,
                            const GeneratorParams& params) {
  if (!(target > 0.0 && target <= 1.0)) throw ValidationError("target must be in (0,1]");
  if (!(tolerance >= 0.0)) throw ValidationError("tolerance must be >= 0");
  model.validate();
  constexpr int kMaxSteps = 30;
  CalibrationResult best{model, -1.0, 0};
  int steps = 0;
  auto evaluate = [&](const ConfusionModel& m) {
    ++steps;
    double rate = simulated_top1(sample, lexicon, m, k, seed, params);
    if (best.achieved < 0.0 || std::abs(rate - target) < std::abs(best.achieved - target)) {
      best = {m, rate, steps};
    }
    return rate;
  };
  auto done = [&](double rate) { return std::abs(rate - target) <= tolerance; };
  auto fail = [&] {
    throw CalibrationError("could not reach top-1 rate " + std::to_string(target) +
                               " within " + std::to_string(kMaxSteps) +
                               " steps; best achieved " + std::to_string(best.achieved),
                           best.achieved);
  };

  ConfusionModel m = model;
  m.sub_rate = 0.0;
  double rate = evaluate(m);
  if (done(rate)) return {m, rate, steps};
  if (rate < target) fail();  // a clean channel is already below the target

  m.sub_rate = 1.0;
  rate = evaluate(m);
  if (done(rate)) return {m, rate, steps};

  if (rate < target) {
    double lo = 0.0, hi = 1.0;  // rate(lo) > target > rate(hi)
    while (steps < kMaxSteps) {
      m.sub_rate = 0.5 * (lo + hi);
      rate = evaluate(m);
      if (done(rate)) return {m, rate, steps};
      (rate > target ? lo : hi) = m.sub_rate;
    }
    fail();
  }

  // Full substitution still leaves accuracy above target: add score noise.
  double lo = m.score_noise;
  double hi = std::max(1.0, 2.0 * lo);
  while (steps < kMaxSteps) {
    m.score_noise = hi;
    rate = evaluate(m);
    if (done(rate)) return {m, rate, steps};
    if (rate < target) break;
    lo = hi;
    hi *= 2.0;
  }
  while (steps < kMaxSteps) {
    m.score_noise = 0.5 * (lo + hi);
    rate = evaluate(m);
    if (done(rate)) return {m, rate, steps};
    (rate > target ? lo : hi) = m.score_noise;
  }
  fail();
  return best;  // unreachable
}

}  // namespace candsel
