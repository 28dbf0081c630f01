#include "candsel/collocation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "candsel/errors.hpp"

namespace candsel {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Bytes >= 0x80 belong to UTF-8 sequences and are treated as word characters.
bool is_word_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u);
}

bool is_terminator(std::string_view token) {
  return token == "." || token == "!" || token == "?";
}

}  // namespace

Corpus tokenize_sentences(std::string_view text) {
  Corpus corpus;
  Sentence current;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < n && is_word_char(text[j])) ++j;
      current.emplace_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    current.emplace_back(1, c);
    ++i;
    if (is_terminator(current.back())) {
      std::size_t j = i;
      while (j < n && is_space(text[j])) ++j;
      bool boundary = j == n ||
                      (j > i && std::isupper(static_cast<unsigned char>(text[j])));
      if (boundary) {
        corpus.push_back(std::move(current));
        current = {};
      }
    }
  }
  if (!current.empty()) corpus.push_back(std::move(current));
  return corpus;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for (auto& sentence : tokenize_sentences(text)) {
    for (auto& token : sentence) tokens.push_back(std::move(token));
  }
  return tokens;
}

double squash(double mi, double scale) { return 1.0 / (1.0 + std::exp(-mi / scale)); }

CollocationModel::CollocationModel(int max_distance) : max_distance_(max_distance) {
  if (max_distance < 1 || max_distance > 255) {
    throw ValidationError("max distance must be in [1,255], got " +
                          std::to_string(max_distance));
  }
}

CollocationModel CollocationModel::train(const Corpus& corpus, int max_distance) {
  CollocationModel model(max_distance);
  for (const auto& sentence : corpus) model.add_sentence(sentence);
  return model;
}

std::uint64_t CollocationModel::key(WordId a, WordId b, int distance) {
  return (static_cast<std::uint64_t>(a) << 36) | (static_cast<std::uint64_t>(b) << 8) |
         static_cast<std::uint64_t>(distance);
}

CollocationModel::WordId CollocationModel::intern(const std::string& word) {
  auto [it, inserted] = ids_.try_emplace(word, static_cast<WordId>(words_.size()));
  if (inserted) {
    if (words_.size() >= (1u << 28)) throw ValidationError("vocabulary too large");
    words_.push_back(word);
    unigrams_.push_back(0);
  }
  return it->second;
}

const CollocationModel::WordId* CollocationModel::lookup(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? nullptr : &it->second;
}

void CollocationModel::check_distance(int distance) const {
  if (distance < 1 || distance > max_distance_) {
    throw ValidationError("distance " + std::to_string(distance) +
                          " outside [1," + std::to_string(max_distance_) + "]");
  }
}

void CollocationModel::add_sentence(const Sentence& sentence) {
  std::vector<WordId> ids;
  ids.reserve(sentence.size());
  for (const auto& token : sentence) {
    WordId id = intern(token);
    ids.push_back(id);
    ++unigrams_[id];
    ++total_;
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (int d = 1; d <= max_distance_ && i + d < ids.size(); ++d) {
      ++pairs_[key(ids[i], ids[i + d], d)];
    }
  }
}

std::uint64_t CollocationModel::unigram(std::string_view word) const {
  const WordId* id = lookup(word);
  return id ? unigrams_[*id] : 0;
}

std::uint64_t CollocationModel::pair(std::string_view a, std::string_view b,
                                     int distance) const {
  check_distance(distance);
  const WordId* ia = lookup(a);
  const WordId* ib = lookup(b);
  if (!ia || !ib) return 0;
  auto it = pairs_.find(key(*ia, *ib, distance));
  return it == pairs_.end() ? 0 : it->second;
}

double CollocationModel::mi_score(std::string_view a, std::string_view b,
                                  int distance) const {
  check_distance(distance);
  const WordId* ia = lookup(a);
  const WordId* ib = lookup(b);
  if (!ia || !ib) return 0.0;
  auto it = pairs_.find(key(*ia, *ib, distance));
  double joint = static_cast<double>(it == pairs_.end() ? 0 : it->second) + 1.0;
  double ua = static_cast<double>(unigrams_[*ia]) + 1.0;
  double ub = static_cast<double>(unigrams_[*ib]) + 1.0;
  double n = static_cast<double>(total_);
  return std::log2(joint * n / (ua * ub));
}

double CollocationModel::support(std::string_view a, std::string_view b, int distance,
                                 double scale) const {
  return squash(mi_score(a, b, distance), scale);
}

void CollocationModel::save(std::ostream& out) const {
  out << "collocation v1 D=" << max_distance_ << " N=" << total_ << '\n';
  out << "[unigram]\n";
  std::vector<WordId> order(words_.size());
  for (WordId i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](WordId x, WordId y) { return words_[x] < words_[y]; });
  for (WordId id : order) out << words_[id] << '\t' << unigrams_[id] << '\n';
  out << "[pair]\n";
  std::vector<std::tuple<const std::string*, const std::string*, int, std::uint64_t>> rows;
  rows.reserve(pairs_.size());
  for (const auto& [k, count] : pairs_) {
    auto a = static_cast<WordId>(k >> 36);
    auto b = static_cast<WordId>((k >> 8) & ((1u << 28) - 1));
    int d = static_cast<int>(k & 0xff);
    rows.emplace_back(&words_[a], &words_[b], d, count);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    return std::tie(*std::get<0>(x), *std::get<1>(x), std::get<2>(x)) <
           std::tie(*std::get<0>(y), *std::get<1>(y), std::get<2>(y));
  });
  for (const auto& [a, b, d, count] : rows) {
    out << *a << '\t' << *b << '\t' << d << '\t' << count << '\n';
  }
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line_no, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(std::string("bad ") + what + " '" + std::string(text) + "'", line_no);
  }
  return value;
}

}  // namespace

CollocationModel CollocationModel::load(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing header", line_no);
  int d = 0;
  std::uint64_t n = 0;
  {
    const std::string prefix = "collocation v1 D=";
    auto pos_n = line.find(" N=");
    if (line.rfind(prefix, 0) != 0 || pos_n == std::string::npos) {
      throw ParseError("expected 'collocation v1 D=<d> N=<total>'", line_no);
    }
    std::string_view view(line);
    d = parse_number<int>(view.substr(prefix.size(), pos_n - prefix.size()), line_no,
                          "max distance");
    n = parse_number<std::uint64_t>(view.substr(pos_n + 3), line_no, "token total");
  }
  CollocationModel model = [&] {
    try {
      return CollocationModel(d);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }();

  enum class Section { None, Unigram, Pair } section = Section::None;
  std::uint64_t unigram_sum = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "[unigram]") {
      section = Section::Unigram;
      continue;
    }
    if (line == "[pair]") {
      section = Section::Pair;
      continue;
    }
    auto fields = split_tabs(line);
    if (section == Section::Unigram) {
      if (fields.size() != 2 || fields[0].empty()) {
        throw ParseError("expected 'word TAB count'", line_no);
      }
      auto count = parse_number<std::uint64_t>(fields[1], line_no, "count");
      std::string word(fields[0]);
      if (model.ids_.contains(word)) throw ParseError("duplicate unigram '" + word + "'", line_no);
      model.unigrams_[model.intern(word)] = count;
      unigram_sum += count;
    } else if (section == Section::Pair) {
      if (fields.size() != 4 || fields[0].empty() || fields[1].empty()) {
        throw ParseError("expected 'a TAB b TAB d TAB count'", line_no);
      }
      int dist = parse_number<int>(fields[2], line_no, "distance");
      if (dist < 1 || dist > model.max_distance_) {
        throw ParseError("distance " + std::to_string(dist) + " out of range", line_no);
      }
      auto count = parse_number<std::uint64_t>(fields[3], line_no, "count");
      const WordId* ia = model.lookup(fields[0]);
      const WordId* ib = model.lookup(fields[1]);
      if (!ia || !ib) throw ParseError("pair references a word without unigram count", line_no);
      if (count > std::min(model.unigrams_[*ia], model.unigrams_[*ib])) {
        throw ParseError("pair count exceeds a unigram count", line_no);
      }
      if (!model.pairs_.emplace(key(*ia, *ib, dist), count).second) {
        throw ParseError("duplicate pair", line_no);
      }
    } else {
      throw ParseError("data outside a section", line_no);
    }
  }
  if (unigram_sum != n) {
    throw ParseError("unigram counts sum to " + std::to_string(unigram_sum) +
                         ", header says N=" + std::to_string(n),
                     line_no);
  }
  model.total_ = n;
  return model;
}

bool operator==(const CollocationModel& a, const CollocationModel& b) {
  if (a.max_distance_ != b.max_distance_ || a.total_ != b.total_ ||
      a.words_.size() != b.words_.size() || a.pairs_.size() != b.pairs_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.words_.size(); ++i) {
    if (b.unigram(a.words_[i]) != a.unigrams_[i] || !b.lookup(a.words_[i])) return false;
  }
  for (const auto& [k, count] : a.pairs_) {
    const auto& wa = a.words_[k >> 36];
    const auto& wb = a.words_[(k >> 8) & ((1u << 28) - 1)];
    if (b.pair(wa, wb, static_cast<int>(k & 0xff)) != count) return false;
  }
  return true;
}

}  // namespace candsel
