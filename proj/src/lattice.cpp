#include "candsel/lattice.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <string>

#include "candsel/errors.hpp"

namespace candsel {

namespace {

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.word < b.word;
}

void check_score(double score, std::string_view word) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw ValidationError("score " + std::to_string(score) + " of candidate '" +
                          std::string(word) + "' is outside [0,1]");
  }
}

std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

}  // namespace

CandidateSet::CandidateSet(ImageId image_id, std::vector<Entry> entries,
                           std::optional<std::string> truth,
                           std::size_t max_candidates)
    : image_id_(image_id), truth_(std::move(truth)) {
  if (entries.empty()) {
    throw ValidationError("candidate set for image " + std::to_string(image_id) +
                          " has no entries");
  }
  if (entries.size() > max_candidates) {
    throw ValidationError("candidate set for image " + std::to_string(image_id) +
                          " has " + std::to_string(entries.size()) +
                          " entries, limit is " + std::to_string(max_candidates));
  }
  std::set<std::string_view> seen;
  candidates_.reserve(entries.size());
  for (auto& [word, score] : entries) {
    if (word.empty()) {
      throw ValidationError("empty candidate word for image " +
                            std::to_string(image_id));
    }
    check_score(score, word);
    if (!seen.insert(word).second) {
      throw ValidationError("duplicate candidate '" + word + "' for image " +
                            std::to_string(image_id));
    }
  }
  for (auto& [word, score] : entries) {
    candidates_.push_back({std::move(word), score});
  }
  sort();
}

std::optional<std::size_t> CandidateSet::find(std::string_view word) const {
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    if (candidates_[i].word == word) return i;
  }
  return std::nullopt;
}

double CandidateSet::sum() const {
  double total = 0.0;
  for (const auto& c : candidates_) total += c.score;
  return total;
}

void CandidateSet::set_scores(std::span<const double> scores) {
  if (scores.size() != candidates_.size()) {
    throw ValidationError("score vector size mismatch");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    check_score(scores[i], candidates_[i].word);
  }
  for (std::size_t i = 0; i < scores.size(); ++i) candidates_[i].score = scores[i];
  sort();
}

void CandidateSet::reweight(std::span<const double> weights) {
  if (weights.size() != candidates_.size()) {
    throw ValidationError("weight vector size mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("weights must be finite and non-negative");
    }
    total += w;
  }
  if (total <= 0.0) {
    throw DegenerateInputError("all scores of image " + std::to_string(image_id_) +
                               " are zero");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    candidates_[i].score = std::min(1.0, weights[i] / total);
  }
  sort();
}

void CandidateSet::normalize() {
  std::vector<double> weights;
  weights.reserve(candidates_.size());
  for (const auto& c : candidates_) weights.push_back(c.score);
  reweight(weights);
}

void CandidateSet::retain(std::span<const std::size_t> indices) {
  if (indices.empty()) throw ValidationError("cannot empty a candidate set");
  std::vector<Candidate> kept;
  kept.reserve(indices.size());
  for (std::size_t i : indices) kept.push_back(candidates_.at(i));
  candidates_ = std::move(kept);
  sort();
}

void CandidateSet::sort() {
  std::stable_sort(candidates_.begin(), candidates_.end(), ranks_before);
}

CandidateSet make_candidate_set(ImageId image_id,
                                std::vector<CandidateSet::Entry> entries,
                                std::optional<std::string> truth,
                                std::size_t max_candidates) {
  return CandidateSet(image_id, std::move(entries), std::move(truth),
                      max_candidates);
}

CandidateSet normalize_scores(CandidateSet set) {
  set.normalize();
  return set;
}

std::size_t Page::position_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.positions.size();
  return n;
}

void validate(const Page& page) {
  std::set<ImageId> ids;
  for (std::size_t s = 0; s < page.sentences.size(); ++s) {
    if (page.sentences[s].positions.empty()) {
      throw ValidationError("sentence " + std::to_string(s) + " is empty");
    }
    for (const auto& set : page.sentences[s].positions) {
      if (!ids.insert(set.image_id()).second) {
        throw ValidationError("duplicate image id " +
                              std::to_string(set.image_id()));
      }
    }
  }
  for (const auto& [id, bitmap] : page.bitmaps) {
    if (!ids.contains(id)) {
      throw ValidationError("bitmap for unknown image id " + std::to_string(id));
    }
  }
}

std::map<ImageId, Location> index_page(const Page& page) {
  std::map<ImageId, Location> index;
  for (std::size_t s = 0; s < page.sentences.size(); ++s) {
    const auto& positions = page.sentences[s].positions;
    for (std::size_t p = 0; p < positions.size(); ++p) {
      index.emplace(positions[p].image_id(), Location{s, p});
    }
  }
  return index;
}

DecisionSequence decide_page(const Page& page) {
  DecisionSequence decisions;
  for (const auto& sentence : page.sentences) {
    for (const auto& set : sentence.positions) {
      decisions.emplace(set.image_id(), set.top1().word);
    }
  }
  return decisions;
}

TruthMap truth_of(const Page& page) {
  TruthMap truth;
  for (const auto& sentence : page.sentences) {
    for (const auto& set : sentence.positions) {
      if (set.truth()) truth.emplace(set.image_id(), *set.truth());
    }
  }
  return truth;
}

bool is_word_token(std::string_view token) {
  return std::any_of(token.begin(), token.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u);
  });
}

TruthMap word_truth_of(const Page& page) {
  TruthMap truth = truth_of(page);
  std::erase_if(truth, [](const auto& kv) { return !is_word_token(kv.second); });
  return truth;
}

double word_correct_rate(const Page& page) {
  const TruthMap truth = word_truth_of(page);
  DecisionSequence decisions = decide_page(page);
  std::erase_if(decisions, [&](const auto& kv) { return !truth.count(kv.first); });
  return correct_rate(decisions, truth);
}

double correct_rate(const DecisionSequence& decisions, const TruthMap& truth) {
  if (decisions.size() != truth.size()) {
    throw ValidationError("decisions cover " + std::to_string(decisions.size()) +
                          " positions but truth covers " +
                          std::to_string(truth.size()));
  }
  if (decisions.empty()) throw ValidationError("no positions to score");
  std::size_t correct = 0;
  auto t = truth.begin();
  for (const auto& [id, word] : decisions) {
    if (t->first != id) {
      throw ValidationError("image id " + std::to_string(id) +
                            " has a decision but no truth");
    }
    if (t->second == word) ++correct;
    ++t;
  }
  return static_cast<double>(correct) / static_cast<double>(decisions.size());
}

void write_page(std::ostream& out, const Page& page) {
  bool first = true;
  for (const auto& sentence : page.sentences) {
    if (!first) out << '\n';
    first = false;
    for (const auto& set : sentence.positions) {
      // Order by the printed score so that reading the file back reproduces
      // the same line.
      std::vector<std::pair<std::string, const Candidate*>> printed;
      for (const auto& c : set.candidates()) printed.emplace_back(format_score(c.score), &c);
      std::stable_sort(printed.begin(), printed.end(), [](const auto& a, const auto& b) {
        double sa = std::stod(a.first);
        double sb = std::stod(b.first);
        if (sa != sb) return sa > sb;
        return a.second->word < b.second->word;
      });
      out << set.image_id() << '\t' << set.truth().value_or("") << '\t';
      for (std::size_t i = 0; i < printed.size(); ++i) {
        if (i > 0) out << ',';
        out << printed[i].second->word << ':' << printed[i].first;
      }
      out << '\n';
    }
  }
}

namespace {

std::vector<CandidateSet::Entry> parse_entries(std::string_view field,
                                               std::size_t line_no) {
  std::vector<CandidateSet::Entry> entries;
  std::size_t p = 0;
  while (p < field.size()) {
    // A word is non-empty, so the separating colon is searched from p + 1;
    // this admits the tokens ":" and "," as words.
    std::size_t colon = field.find(':', p + 1);
    if (colon == std::string_view::npos) {
      throw ParseError("missing ':score' after candidate word", line_no);
    }
    std::string word(field.substr(p, colon - p));
    std::size_t q = colon + 1;
    std::size_t end = q;
    while (end < field.size() && field[end] != ',') ++end;
    double score = 0.0;
    auto [ptr, ec] = std::from_chars(field.data() + q, field.data() + end, score);
    if (ec != std::errc() || ptr != field.data() + end || q == end) {
      throw ParseError("bad score for candidate '" + word + "'", line_no);
    }
    entries.emplace_back(std::move(word), score);
    p = end;
    if (p < field.size()) {
      ++p;  // ','
      if (p == field.size()) throw ParseError("trailing ','", line_no);
    }
  }
  if (entries.empty()) throw ParseError("no candidates", line_no);
  return entries;
}

}  // namespace

Page read_page(std::istream& in, std::size_t max_candidates) {
  Page page;
  SentenceLattice current;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!current.positions.empty()) {
      page.sentences.push_back(std::move(current));
      current = {};
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw ParseError("expected 'image_id TAB truth TAB candidates'", line_no);
    }
    std::string_view view(line);
    std::string_view id_text = view.substr(0, t1);
    ImageId id = 0;
    auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc() || ptr != id_text.data() + id_text.size() || id_text.empty()) {
      throw ParseError("bad image id '" + std::string(id_text) + "'", line_no);
    }
    std::string_view truth_text = view.substr(t1 + 1, t2 - t1 - 1);
    std::optional<std::string> truth;
    if (!truth_text.empty()) truth = std::string(truth_text);
    auto entries = parse_entries(view.substr(t2 + 1), line_no);
    try {
      current.positions.emplace_back(id, std::move(entries), std::move(truth),
                                     max_candidates);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  flush();
  try {
    validate(page);
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line_no);
  }
  return page;
}

}  // namespace candsel
