#include "vgs/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vgs {

namespace {

const std::set<std::string>& vowel_set() {
  static const std::set<std::string> vowels{"AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER",
                                            "EY", "IH", "IY", "OW", "OY", "UH", "UW"};
  return vowels;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool one_substitution(const PhoneSeq& a, const PhoneSeq& b) {
  if (a.size() != b.size()) return false;
  int diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i] && ++diff > 1) return false;
  return diff == 1;
}

// True when the longer sequence equals the shorter with one phone inserted.
bool one_indel(const PhoneSeq& a, const PhoneSeq& b) {
  const PhoneSeq& s = a.size() < b.size() ? a : b;
  const PhoneSeq& l = a.size() < b.size() ? b : a;
  if (l.size() != s.size() + 1) return false;
  std::size_t i = 0;
  while (i < s.size() && s[i] == l[i]) ++i;
  return std::equal(s.begin() + i, s.end(), l.begin() + i + 1);
}

}  // namespace

bool is_vowel_phone(const std::string& phone) { return vowel_set().count(phone) != 0; }

int count_vowels(const PhoneSeq& phones) {
  int n = 0;
  for (const auto& p : phones) n += is_vowel_phone(p) ? 1 : 0;
  return n;
}

int count_consonants(const PhoneSeq& phones) {
  return static_cast<int>(phones.size()) - count_vowels(phones);
}

void PronDict::insert(const std::string& word, PhoneSeq phones) {
  if (word.empty()) throw std::invalid_argument("dictionary: empty headword");
  if (phones.empty()) throw std::invalid_argument("dictionary: empty pronunciation for " + word);
  auto [it, fresh] = by_word_.emplace(word, std::move(phones));
  (void)it;
  if (!fresh) throw std::invalid_argument("dictionary: duplicate entry for " + word);
  dirty_ = true;
}

const PhoneSeq& PronDict::phones(const std::string& word) const {
  auto it = by_word_.find(word);
  if (it == by_word_.end()) throw std::invalid_argument("dictionary: unknown word " + word);
  return it->second;
}

void PronDict::reindex() const {
  sorted_.clear();
  sorted_.reserve(by_word_.size());
  for (const auto& [w, p] : by_word_) sorted_.push_back(&p);
  std::sort(sorted_.begin(), sorted_.end(),
            [](const PhoneSeq* a, const PhoneSeq* b) { return *a < *b; });
  dirty_ = false;
}

int PronDict::initial_cohort_size(const PhoneSeq& prefix) const {
  if (dirty_) reindex();
  auto less_than = [](const PhoneSeq* a, const PhoneSeq& b) { return *a < b; };
  auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), prefix, less_than);
  // '~' sorts after every uppercase phone symbol, so [prefix, prefix+"~")
  // brackets exactly the sequences that extend or equal the prefix.
  PhoneSeq high = prefix;
  high.push_back("~");
  auto hi = std::lower_bound(sorted_.begin(), sorted_.end(), high, less_than);
  return static_cast<int>(hi - lo);
}

int PronDict::neighbourhood_density(const PhoneSeq& phones, bool substitutions_only) const {
  int n = 0;
  for (const auto& [w, p] : by_word_) {
    if (p == phones) continue;
    if (one_substitution(p, phones)) {
      ++n;
      continue;
    }
    if (!substitutions_only && one_indel(p, phones)) ++n;
  }
  return n;
}

int PronDict::neighbourhood_density(const std::string& word, bool substitutions_only) const {
  return neighbourhood_density(phones(word), substitutions_only);
}

PronDict parse_dictionary(std::istream& in) {
  PronDict dict;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind(";;;", 0) == 0) continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    std::vector<std::string> phones;
    std::string tok;
    while (ls >> tok) {
      while (!tok.empty() && std::isdigit(static_cast<unsigned char>(tok.back()))) tok.pop_back();
      if (tok.empty())
        throw std::runtime_error("dictionary: line " + std::to_string(line_no) +
                                 ": phone token is only digits");
      for (char c : tok)
        if (!std::isupper(static_cast<unsigned char>(c)))
          throw std::runtime_error("dictionary: line " + std::to_string(line_no) +
                                   ": malformed phone " + tok);
      phones.push_back(tok);
    }
    if (phones.empty())
      throw std::runtime_error("dictionary: line " + std::to_string(line_no) +
                               ": no pronunciation for " + head);
    // Alternative pronunciations: keep only the first.
    auto paren = head.find('(');
    if (paren != std::string::npos) {
      if (head.back() != ')')
        throw std::runtime_error("dictionary: line " + std::to_string(line_no) +
                                 ": malformed headword " + head);
      continue;
    }
    try {
      dict.insert(lower(head), std::move(phones));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("dictionary: line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return dict;
}

std::map<std::string, std::string> parse_lemma_map(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("lemma map: line " + std::to_string(line_no) + ": expected two tab-separated columns");
    std::string word = lower(line.substr(0, tab));
    std::string lemma = lower(line.substr(tab + 1));
    if (word.empty() || lemma.empty())
      throw std::runtime_error("lemma map: line " + std::to_string(line_no) + ": empty field");
    out[word] = lemma;
  }
  return out;
}

int TranscriptCounts::word_count(const std::string& w) const {
  auto it = word_counts.find(w);
  return it == word_counts.end() ? 0 : it->second;
}

int TranscriptCounts::lemma_count(const std::string& l) const {
  auto it = lemma_counts.find(l);
  return it == lemma_counts.end() ? 0 : it->second;
}

TranscriptCounts count_transcripts(std::istream& transcript,
                                   const std::map<std::string, std::string>& lemma_map) {
  TranscriptCounts out;
  std::string tok;
  while (transcript >> tok) {
    std::string w = lower(tok);
    out.word_counts[w] += 1;
    auto it = lemma_map.find(w);
    out.lemma_counts[it == lemma_map.end() ? w : it->second] += 1;
  }
  return out;
}

double speaking_rate(int phone_count, double duration_s) {
  if (phone_count <= 0) throw std::invalid_argument("speaking_rate: phone count must be positive");
  if (duration_s <= 0) throw std::invalid_argument("speaking_rate: duration must be positive");
  return phone_count / duration_s;
}

}  // namespace vgs
