#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

namespace vgs {

using PhoneSeq = std::vector<std::string>;

bool is_vowel_phone(const std::string& phone);
int count_vowels(const PhoneSeq& phones);
int count_consonants(const PhoneSeq& phones);

// Pronunciation dictionary in the classic electronic-dictionary text format:
// one entry per line, headword then space-separated phones, ";;;" comment
// lines, alternative pronunciations marked "WORD(2)". Stress digits on the
// phones are stripped; only the first pronunciation of a word is kept.
// Headwords are lowercased.
class PronDict {
 public:
  void insert(const std::string& word, PhoneSeq phones);

  bool has(const std::string& word) const { return by_word_.count(word) != 0; }
  const PhoneSeq& phones(const std::string& word) const;
  std::size_t size() const { return by_word_.size(); }

  const std::map<std::string, PhoneSeq>& words() const { return by_word_; }

  // Entries whose pronunciation starts with `prefix`; the whole dictionary
  // for an empty prefix. Implemented over a sorted index.
  int initial_cohort_size(const PhoneSeq& prefix) const;

  // Entries whose pronunciation differs from `phones` by exactly one
  // substitution, or (unless substitutions_only) one insertion or deletion.
  // Identical pronunciations (the word itself, homophones) never count.
  int neighbourhood_density(const PhoneSeq& phones, bool substitutions_only = false) const;
  int neighbourhood_density(const std::string& word, bool substitutions_only = false) const;

 private:
  void reindex() const;

  std::map<std::string, PhoneSeq> by_word_;
  mutable std::vector<const PhoneSeq*> sorted_;  // rebuilt lazily after inserts
  mutable bool dirty_ = false;
};

// Throws std::runtime_error naming the line number on malformed input.
PronDict parse_dictionary(std::istream& in);

// Two-column word<TAB>lemma table.
std::map<std::string, std::string> parse_lemma_map(std::istream& in);

struct TranscriptCounts {
  std::map<std::string, int> word_counts;
  std::map<std::string, int> lemma_counts;

  int word_count(const std::string& w) const;
  int lemma_count(const std::string& l) const;
};

// Whitespace tokenization, lowercased. Tokens missing from the lemma map
// count toward themselves as lemma.
TranscriptCounts count_transcripts(std::istream& transcript,
                                   const std::map<std::string, std::string>& lemma_map);

// Phones per second.
double speaking_rate(int phone_count, double duration_s);

}  // namespace vgs
