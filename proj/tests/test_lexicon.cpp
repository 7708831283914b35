#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sstream>

#include "doctest.h"
#include "vgs/common.hpp"
#include "vgs/lexicon.hpp"

using namespace vgs;

namespace {

PronDict dict_from(const std::string& text) {
  std::istringstream in(text);
  return parse_dictionary(in);
}

// Independent oracle: plain linear scan with per-entry prefix comparison.
int cohort_oracle(const PronDict& d, const PhoneSeq& prefix) {
  int n = 0;
  for (const auto& [w, p] : d.words()) {
    if (p.size() < prefix.size()) continue;
    bool match = true;
    for (std::size_t i = 0; i < prefix.size(); ++i)
      if (p[i] != prefix[i]) {
        match = false;
        break;
      }
    if (match) ++n;
  }
  return n;
}

// Independent oracle: full dynamic-programming edit distance, then a
// distance-one test.
int edit_distance(const PhoneSeq& a, const PhoneSeq& b) {
  std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

int density_oracle(const PronDict& d, const PhoneSeq& phones, bool subs_only) {
  int n = 0;
  for (const auto& [w, p] : d.words()) {
    if (p == phones) continue;
    if (subs_only) {
      if (p.size() != phones.size()) continue;
      int diff = 0;
      for (std::size_t i = 0; i < p.size(); ++i) diff += p[i] != phones[i] ? 1 : 0;
      if (diff == 1) ++n;
    } else if (edit_distance(p, phones) == 1) {
      ++n;
    }
  }
  return n;
}

PronDict random_dict(int n_words, std::uint64_t seed) {
  static const std::vector<std::string> inventory{"AA", "AE", "IH", "IY", "UW", "K", "T",
                                                  "S", "N", "L", "D", "B", "M", "G"};
  Rng rng(seed);
  PronDict d;
  for (int w = 0; w < n_words; ++w) {
    int len = rng.uniform_int(2, 6);
    PhoneSeq p;
    for (int i = 0; i < len; ++i)
      p.push_back(inventory[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(inventory.size()) - 1))]);
    d.insert("w" + std::to_string(w), std::move(p));
  }
  return d;
}

}  // namespace

TEST_CASE("dictionary parsing strips stress, keeps first variant, lowercases") {
  PronDict d = dict_from(
      ";;; header comment\n"
      "ABOUT  AH0 B AW1 T\n"
      "ABOUT(2)  AH0 B AW1 T AH0\n"
      "CAT  K AE1 T\n"
      "\n"
      "CATS  K AE1 T S\n");
  CHECK(d.size() == 3);
  CHECK(d.has("about"));
  CHECK_FALSE(d.has("ABOUT"));
  PhoneSeq expect{"AH", "B", "AW", "T"};
  CHECK(d.phones("about") == expect);
  CHECK(d.phones("cat") == PhoneSeq{"K", "AE", "T"});
}

TEST_CASE("dictionary parsing reports the offending line") {
  auto expect_line = [](const std::string& text, const char* fragment) {
    std::istringstream in(text);
    try {
      parse_dictionary(in);
      FAIL("expected runtime_error");
    } catch (const std::runtime_error& e) {
      std::string msg = e.what();
      CHECK(msg.find(fragment) != std::string::npos);
    }
  };
  expect_line("CAT K AE T\nBAD\n", "line 2");
  expect_line("CAT K AE T\nBAD 123\n", "line 2");
  expect_line("ODD k ae t\n", "line 1");
  expect_line("CAT K AE T\nCAT K AA T\n", "line 2");
}

TEST_CASE("vowel classification follows the transcription inventory") {
  CHECK(is_vowel_phone("AH"));
  CHECK(is_vowel_phone("OY"));
  CHECK_FALSE(is_vowel_phone("K"));
  CHECK_FALSE(is_vowel_phone("ZH"));
  PhoneSeq about{"AH", "B", "AW", "T"};
  CHECK(count_vowels(about) == 2);
  CHECK(count_consonants(about) == 2);
}

TEST_CASE("initial cohort counts prefix extensions including exact matches") {
  PronDict d = dict_from(
      "CAT K AE1 T\n"
      "CATTLE K AE1 T AH0 L\n"
      "CAB K AE1 B\n"
      "COT K AA1 T\n"
      "AT AE1 T\n"
      "KA K AE1\n");
  CHECK(d.initial_cohort_size({"K", "AE"}) == 4);
  CHECK(d.initial_cohort_size({"K", "AE", "T"}) == 2);
  CHECK(d.initial_cohort_size({"K"}) == 5);
  CHECK(d.initial_cohort_size({}) == 6);
  CHECK(d.initial_cohort_size({"ZH"}) == 0);
}

TEST_CASE("neighbourhood density distinguishes substitution-only mode") {
  PronDict d = dict_from(
      "CAT K AE1 T\n"
      "BAT B AE1 T\n"
      "COT K AA1 T\n"
      "CATS K AE1 T S\n"
      "AT AE1 T\n"
      "SCAT S K AE1 T\n"
      "DOG D AO1 G\n"
      "KAT K AE1 T\n");
  CHECK(d.neighbourhood_density("cat", true) == 2);
  CHECK(d.neighbourhood_density("cat", false) == 5);
  CHECK(d.neighbourhood_density("dog", false) == 0);
  CHECK_THROWS_AS(d.neighbourhood_density("missing", false), std::invalid_argument);
}

TEST_CASE("cohort and density match brute-force oracles on a random dictionary") {
  PronDict d = random_dict(200, 77);
  Rng rng(123);
  std::vector<PhoneSeq> words;
  for (const auto& [w, p] : d.words()) words.push_back(p);
  for (int trial = 0; trial < 60; ++trial) {
    const PhoneSeq& base = words[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(words.size()) - 1))];
    for (std::size_t g = 1; g <= base.size(); ++g) {
      PhoneSeq prefix(base.begin(), base.begin() + static_cast<long>(g));
      CHECK(d.initial_cohort_size(prefix) == cohort_oracle(d, prefix));
    }
    CHECK(d.neighbourhood_density(base, false) == density_oracle(d, base, false));
    CHECK(d.neighbourhood_density(base, true) == density_oracle(d, base, true));
  }
}

TEST_CASE("cohorts shrink monotonically as the prefix grows") {
  PronDict d = random_dict(300, 5);
  for (const auto& [w, p] : d.words()) {
    int prev = d.initial_cohort_size({p[0]});
    for (std::size_t g = 2; g <= p.size(); ++g) {
      int cur = d.initial_cohort_size(PhoneSeq(p.begin(), p.begin() + static_cast<long>(g)));
      CHECK(cur <= prev);
      CHECK(cur >= 1);
      prev = cur;
    }
  }
}

TEST_CASE("lemma map and transcript counting") {
  std::istringstream lm("dogs\tdog\nruns\trun\nran\trun\n");
  auto lemma_map = parse_lemma_map(lm);
  CHECK(lemma_map.at("dogs") == "dog");

  std::istringstream bad("onlyonecolumn\n");
  CHECK_THROWS_AS(parse_lemma_map(bad), std::runtime_error);

  std::istringstream tr("the dogs run\nThe dog runs\n");
  TranscriptCounts c = count_transcripts(tr, lemma_map);
  CHECK(c.word_count("the") == 2);
  CHECK(c.word_count("dogs") == 1);
  CHECK(c.word_count("dog") == 1);
  CHECK(c.lemma_count("dog") == 2);
  CHECK(c.lemma_count("run") == 2);
  CHECK(c.lemma_count("the") == 2);
  CHECK(c.word_count("absent") == 0);
  CHECK(c.lemma_count("absent") == 0);
}

TEST_CASE("speaking rate is phones per second") {
  CHECK(speaking_rate(5, 0.5) == doctest::Approx(10.0));
  CHECK_THROWS_AS(speaking_rate(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(speaking_rate(4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(speaking_rate(4, -1.0), std::invalid_argument);
}
