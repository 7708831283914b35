#include "vgs/synth.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vgs/io.hpp"
#include "vgs/lexicon.hpp"

namespace vgs {

namespace {

constexpr double kWindowS = 0.025;
constexpr double kShiftS = 0.010;
constexpr int kSuffixFrames = 3;
constexpr int kPronunciationRetries = 200;

const std::vector<std::string> kVowels = {"AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER",
                                          "EY", "IH", "IY", "OW", "OY", "UH", "UW"};
const std::vector<std::string> kConsonants = {"B", "CH", "D",  "DH", "F", "G",  "HH", "JH",
                                              "K", "L",  "M",  "N",  "NG", "P", "R",  "S",
                                              "SH", "T", "TH", "V",  "W",  "Y", "Z",  "ZH"};

std::string pad_index(int i, int width) {
  std::string s = std::to_string(i);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

int digits_for(int max_value) {
  int d = 1;
  while (max_value >= 10) {
    max_value /= 10;
    ++d;
  }
  return d;
}

// Consonant/vowel alternating pattern of 3-5 phones, starting with a
// consonant, so every pronunciation has at least one vowel.
PhoneSeq draw_pattern(Rng& rng) {
  int len = rng.uniform_int(3, 5);
  PhoneSeq phones;
  phones.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) {
    const auto& pool = (i % 2 == 0) ? kConsonants : kVowels;
    phones.push_back(pool[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(pool.size()) - 1))]);
  }
  return phones;
}

bool is_prefix(const PhoneSeq& prefix, const PhoneSeq& seq) {
  return prefix.size() <= seq.size() &&
         std::equal(prefix.begin(), prefix.end(), seq.begin());
}

// One surface form: its pronunciation, frame template, and the frame extent
// [first, last) of each phone within that template.
struct FormSpec {
  std::string word;
  std::string lemma;
  std::string word_class;
  std::string morphology;
  PhoneSeq phones;
  Matrix frames;
  std::vector<std::pair<int, int>> spans;
};

// Splits `total_frames` across `n_phones` segments, longer segments first.
std::vector<std::pair<int, int>> phone_spans(int n_phones, int total_frames) {
  std::vector<std::pair<int, int>> spans;
  spans.reserve(static_cast<std::size_t>(n_phones));
  int q = total_frames / n_phones;
  int r = total_frames % n_phones;
  int at = 0;
  for (int i = 0; i < n_phones; ++i) {
    int width = q + (i < r ? 1 : 0);
    spans.emplace_back(at, at + width);
    at += width;
  }
  return spans;
}

Matrix gaussian_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.v) x = rng.gaussian();
  return m;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows + b.rows, a.cols);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
  return out;
}

// Frame index -> seconds under the fixed 25 ms / 10 ms analysis grid. The
// boundary between frames k-1 and k sits half a shift before the center of
// frame k, so consecutive intervals tile both the frame range and the
// nominal duration (rows - 1) * shift + window exactly.
double boundary_start(int frame) {
  return frame == 0 ? 0.0 : kShiftS / 2.0 + kWindowS / 2.0 - kShiftS + kShiftS * frame;
}

double boundary_end(int frame, int total_rows) {
  if (frame == total_rows) return (total_rows - 1) * kShiftS + kWindowS;
  return boundary_start(frame);
}

std::vector<PhoneInterval> intervals_for(const PhoneSeq& phones,
                                         const std::vector<std::pair<int, int>>& spans,
                                         int frame_offset, int total_rows) {
  std::vector<PhoneInterval> out;
  out.reserve(phones.size());
  for (std::size_t i = 0; i < phones.size(); ++i) {
    PhoneInterval pi;
    pi.phone = phones[i];
    pi.start_s = boundary_start(frame_offset + spans[i].first);
    pi.end_s = boundary_end(frame_offset + spans[i].second, total_rows);
    out.push_back(pi);
  }
  return out;
}

// Copies a template into `dst` starting at `row`, adding the speaker offset
// and fresh per-cell noise.
void stamp(Matrix& dst, int row, const Matrix& tmpl, const std::vector<double>& offset,
           double noise_level, Rng& rng) {
  for (int r = 0; r < tmpl.rows; ++r)
    for (int c = 0; c < tmpl.cols; ++c)
      dst.at(row + r, c) = tmpl.at(r, c) + offset[static_cast<std::size_t>(c)] +
                           noise_level * rng.gaussian();
}

std::string dictionary_line(const std::string& word, const PhoneSeq& phones) {
  std::string head;
  for (char c : word) head.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  std::string line = head;
  bool first_vowel = true;
  for (const auto& p : phones) {
    line += ' ';
    line += p;
    if (is_vowel_phone(p)) {
      line += first_vowel ? '1' : '0';
      first_vowel = false;
    }
  }
  return line;
}

}  // namespace

void SynthConfig::validate() const {
  if (vocab_size < 5) throw std::invalid_argument("synth: vocab_size must be at least 5");
  if (n_images < 50) throw std::invalid_argument("synth: n_images must be at least 50");
  if (frames_per_word < 8)
    throw std::invalid_argument("synth: frames_per_word must be at least 8");
  if (!(noise_level >= 0.0))
    throw std::invalid_argument("synth: noise_level must be non-negative");
  if (feat_dim < 1) throw std::invalid_argument("synth: feat_dim must be positive");
}

SynthCorpus make_synthetic_corpus(const SynthConfig& cfg) {
  cfg.validate();
  SynthCorpus corpus;

  const int n_verbs = std::max(1, cfg.vocab_size * 3 / 10);
  const int n_nouns = cfg.vocab_size - n_verbs;
  const int lemma_width = std::max(2, digits_for(cfg.vocab_size - 1));
  const int image_width = std::max(3, digits_for(cfg.n_images - 1));

  std::vector<std::string> lemmas;
  for (int i = 0; i < cfg.vocab_size; ++i) lemmas.push_back("w" + pad_index(i, lemma_width));
  auto is_noun = [&](int lemma_idx) { return lemma_idx < n_nouns; };
  // The last two nouns take irregular plurals: a fresh pronunciation instead
  // of the shared suffix, so the plural does not extend the singular.
  auto is_irregular_noun = [&](int lemma_idx) {
    return is_noun(lemma_idx) && lemma_idx >= n_nouns - 2 && n_nouns > 2;
  };

  // --- Pronunciations -------------------------------------------------------
  Rng rng_phones(derive_seed(cfg.seed, "phones"));
  std::set<PhoneSeq> used;
  auto draw_distinct = [&](const std::vector<PhoneSeq>& also_avoid) {
    for (int attempt = 0; attempt < kPronunciationRetries; ++attempt) {
      PhoneSeq cand = draw_pattern(rng_phones);
      if (used.count(cand) != 0) continue;
      bool clash = false;
      for (const auto& other : also_avoid)
        if (cand == other) clash = true;
      if (!clash) return cand;
    }
    throw std::runtime_error(
        "synth: could not draw a distinct pronunciation; vocabulary too large for the "
        "phone inventory");
  };

  struct Lexeme {
    PhoneSeq base;          // singular / root pronunciation
    PhoneSeq inflected;     // plural / third pronunciation
    std::string base_word;
    std::string inflected_word;
  };
  std::vector<Lexeme> lexemes;
  for (int i = 0; i < cfg.vocab_size; ++i) {
    Lexeme lex;
    lex.base_word = lemmas[static_cast<std::size_t>(i)];
    if (is_irregular_noun(i)) {
      lex.base = draw_distinct({});
      used.insert(lex.base);
      // Reject draws that happen to extend the singular, so that irregular
      // plurals are exactly the forms whose phones are not a base extension.
      for (int attempt = 0;; ++attempt) {
        lex.inflected = draw_distinct({});
        if (!is_prefix(lex.base, lex.inflected)) break;
        if (attempt >= kPronunciationRetries)
          throw std::runtime_error("synth: could not draw an irregular plural pronunciation");
      }
      used.insert(lex.inflected);
      lex.inflected_word = lex.base_word + "x";
    } else {
      for (int attempt = 0;; ++attempt) {
        lex.base = draw_distinct({});
        lex.inflected = lex.base;
        lex.inflected.push_back("Z");
        if (used.count(lex.inflected) == 0) break;
        if (attempt >= kPronunciationRetries)
          throw std::runtime_error("synth: could not draw a suffixable pronunciation");
      }
      used.insert(lex.base);
      used.insert(lex.inflected);
      lex.inflected_word = lex.base_word + "s";
    }
    lexemes.push_back(std::move(lex));
  }

  // --- Frame templates ------------------------------------------------------
  Rng rng_templates(derive_seed(cfg.seed, "templates"));
  Matrix suffix_template = gaussian_matrix(kSuffixFrames, cfg.feat_dim, rng_templates);

  std::vector<FormSpec> forms;  // two per lemma, lemma order
  for (int i = 0; i < cfg.vocab_size; ++i) {
    const Lexeme& lex = lexemes[static_cast<std::size_t>(i)];
    int base_frames = cfg.frames_per_word + rng_templates.uniform_int(-2, 2);
    Matrix base_template = gaussian_matrix(base_frames, cfg.feat_dim, rng_templates);

    FormSpec base;
    base.word = lex.base_word;
    base.lemma = lemmas[static_cast<std::size_t>(i)];
    base.word_class = is_noun(i) ? "noun" : "verb";
    base.morphology = is_noun(i) ? "singular" : "root";
    base.phones = lex.base;
    base.frames = base_template;
    base.spans = phone_spans(static_cast<int>(lex.base.size()), base_frames);

    FormSpec inflected;
    inflected.word = lex.inflected_word;
    inflected.lemma = base.lemma;
    inflected.word_class = base.word_class;
    inflected.morphology = is_noun(i) ? "plural" : "third";
    inflected.phones = lex.inflected;
    if (is_irregular_noun(i)) {
      int fr = cfg.frames_per_word + rng_templates.uniform_int(-2, 2);
      inflected.frames = gaussian_matrix(fr, cfg.feat_dim, rng_templates);
      inflected.spans = phone_spans(static_cast<int>(lex.inflected.size()), fr);
    } else {
      inflected.frames = vstack(base_template, suffix_template);
      inflected.spans = base.spans;
      inflected.spans.emplace_back(base_frames, base_frames + kSuffixFrames);
    }

    forms.push_back(std::move(base));
    forms.push_back(std::move(inflected));
  }

  // --- Speakers ---------------------------------------------------------------
  Rng rng_speakers(derive_seed(cfg.seed, "speakers"));
  std::vector<std::vector<double>> speaker_offset(2, std::vector<double>(
                                                         static_cast<std::size_t>(cfg.feat_dim)));
  for (auto& off : speaker_offset)
    for (double& x : off) x = 0.5 * rng_speakers.gaussian();

  // --- Images -----------------------------------------------------------------
  Rng rng_images(derive_seed(cfg.seed, "images"));
  struct ImageSpec {
    std::string id;
    std::vector<std::pair<int, Multiplicity>> referents;  // lemma index
  };
  std::vector<ImageSpec> images;
  std::vector<int> noun_pool, verb_pool;
  for (int i = 0; i < n_nouns; ++i) noun_pool.push_back(i);
  for (int i = n_nouns; i < cfg.vocab_size; ++i) verb_pool.push_back(i);

  for (int i = 0; i < cfg.n_images; ++i) {
    ImageSpec img;
    img.id = "img" + pad_index(i, image_width);
    std::vector<int> nouns = noun_pool;
    rng_images.shuffle(nouns);
    int k_n = std::min<int>(n_nouns, 3 + rng_images.uniform_int(0, 1));
    std::vector<int> verbs = verb_pool;
    rng_images.shuffle(verbs);
    int k_v = std::min<int>(static_cast<int>(verbs.size()), rng_images.uniform_int(0, 1));

    std::vector<double> attrs(static_cast<std::size_t>(cfg.vocab_size), 0.0);
    for (int j = 0; j < k_n; ++j) {
      int lemma_idx = nouns[static_cast<std::size_t>(j)];
      Multiplicity m = rng_images.uniform() < 0.5 ? Multiplicity::multiple : Multiplicity::single;
      img.referents.emplace_back(lemma_idx, m);
      attrs[static_cast<std::size_t>(lemma_idx)] = m == Multiplicity::multiple ? 2.0 : 1.0;
    }
    for (int j = 0; j < k_v; ++j) {
      int lemma_idx = verbs[static_cast<std::size_t>(j)];
      img.referents.emplace_back(lemma_idx, Multiplicity::na);
      attrs[static_cast<std::size_t>(lemma_idx)] = 1.0;
    }
    for (double& x : attrs) x += cfg.noise_level * rng_images.gaussian();

    corpus.image_ids.push_back(img.id);
    corpus.image_vectors[img.id] = std::move(attrs);
    for (const auto& [lemma_idx, m] : img.referents)
      corpus.annotations.by_image[img.id][lemmas[static_cast<std::size_t>(lemma_idx)]] = m;
    images.push_back(std::move(img));
  }

  // --- Splits -----------------------------------------------------------------
  Rng rng_splits(derive_seed(cfg.seed, "splits"));
  std::vector<int> order;
  for (int i = 0; i < cfg.n_images; ++i) order.push_back(i);
  rng_splits.shuffle(order);
  int n_train = cfg.n_images * 40 / 100;
  int n_dev = cfg.n_images * 5 / 100;
  std::vector<std::string> split_of(static_cast<std::size_t>(cfg.n_images));
  for (int pos = 0; pos < cfg.n_images; ++pos) {
    const std::string& s = pos < n_train ? "train" : (pos < n_train + n_dev ? "dev" : "test");
    split_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = s;
  }
  for (int i = 0; i < cfg.n_images; ++i) {
    const std::string& split = split_of[static_cast<std::size_t>(i)];
    corpus.image_split[images[static_cast<std::size_t>(i)].id] = split;
    for (const auto& [lemma_idx, m] : images[static_cast<std::size_t>(i)].referents)
      ++corpus.positives[lemmas[static_cast<std::size_t>(lemma_idx)]][split];
  }

  // --- Captions ---------------------------------------------------------------
  Rng rng_captions(derive_seed(cfg.seed, "captions"));
  std::ostringstream transcripts;
  for (int i = 0; i < cfg.n_images; ++i) {
    const ImageSpec& img = images[static_cast<std::size_t>(i)];
    const std::string& split = split_of[static_cast<std::size_t>(i)];
    int n_caps = split == "train" ? 3 : 1;
    for (int k = 0; k < n_caps; ++k) {
      int spk = rng_captions.uniform_int(0, 1);
      std::vector<std::pair<int, Multiplicity>> chosen = img.referents;
      rng_captions.shuffle(chosen);
      int want = 2 + rng_captions.uniform_int(0, 2);
      chosen.resize(static_cast<std::size_t>(
          std::min<int>(want, static_cast<int>(chosen.size()))));

      std::vector<const FormSpec*> parts;
      for (const auto& [lemma_idx, m] : chosen) {
        const FormSpec& base = forms[static_cast<std::size_t>(2 * lemma_idx)];
        const FormSpec& inflected = forms[static_cast<std::size_t>(2 * lemma_idx + 1)];
        if (base.word_class == "verb")
          parts.push_back(rng_captions.uniform() < 0.5 ? &inflected : &base);
        else
          parts.push_back(m == Multiplicity::multiple ? &inflected : &base);
      }

      int total_rows = 0;
      for (const FormSpec* f : parts) total_rows += f->frames.rows;
      Matrix frames(total_rows, cfg.feat_dim);
      std::vector<PhoneInterval> alignment;
      std::string transcript;
      int at = 0;
      for (const FormSpec* f : parts) {
        stamp(frames, at, f->frames, speaker_offset[static_cast<std::size_t>(spk)],
              cfg.noise_level, rng_captions);
        auto ivs = intervals_for(f->phones, f->spans, at, total_rows);
        alignment.insert(alignment.end(), ivs.begin(), ivs.end());
        if (!transcript.empty()) transcript += ' ';
        transcript += f->word;
        at += f->frames.rows;
      }

      SynthItem item;
      item.id = "cap_" + img.id + "_" + std::to_string(k);
      item.split = split;
      item.image_id = img.id;
      item.speaker = "s" + std::to_string(spk);
      item.caption.utterance_id = item.id;
      item.caption.frames = std::move(frames);
      item.caption.window_s = kWindowS;
      item.caption.shift_s = kShiftS;
      item.transcript = transcript;
      corpus.alignments[item.id] = std::move(alignment);
      if (split == "train") transcripts << transcript << '\n';
      corpus.items.push_back(std::move(item));
    }
  }
  corpus.transcripts_text = transcripts.str();

  // --- Isolated word recordings -------------------------------------------------
  Rng rng_words(derive_seed(cfg.seed, "words"));
  for (const FormSpec& f : forms) {
    for (int spk = 0; spk < 2; ++spk) {
      WordToken tok;
      tok.word = f.word;
      tok.speaker = "s" + std::to_string(spk);
      tok.features.utterance_id = "word_" + f.word + "_s" + std::to_string(spk);
      tok.features.window_s = kWindowS;
      tok.features.shift_s = kShiftS;
      tok.features.frames = Matrix(f.frames.rows, cfg.feat_dim);
      stamp(tok.features.frames, 0, f.frames, speaker_offset[static_cast<std::size_t>(spk)],
            cfg.noise_level, rng_words);
      corpus.alignments[tok.features.utterance_id] =
          intervals_for(f.phones, f.spans, 0, f.frames.rows);
      corpus.word_tokens.push_back(std::move(tok));
    }
  }

  // --- Lexical resources ---------------------------------------------------------
  std::map<std::string, std::string> dict_lines;
  for (const FormSpec& f : forms) {
    std::string line = dictionary_line(f.word, f.phones);
    dict_lines[line.substr(0, line.find(' '))] = line;
    corpus.lemma_map[f.word] = f.lemma;
    corpus.targets.push_back({f.word, f.lemma, f.word_class, f.morphology});
  }
  std::string dict_text;
  for (const auto& [head, line] : dict_lines) {
    (void)head;
    dict_text += line;
    dict_text += '\n';
  }
  corpus.dictionary_text = std::move(dict_text);

  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "images");

  std::vector<ManifestEntry> manifest;
  for (const SynthItem& item : corpus.items) {
    save_features(dir / "features" / (item.id + ".feat"), item.caption);
    ManifestEntry e;
    e.id = item.id;
    e.split = item.split;
    e.caption_path = "features/" + item.id + ".feat";
    e.image_path = "images/" + item.image_id + ".feat";
    manifest.push_back(std::move(e));
  }
  for (const auto& id : corpus.image_ids)
    save_image_vector(dir / "images" / (id + ".feat"), id, corpus.image_vectors.at(id));
  write_manifest(dir / "manifest.tsv", manifest);

  std::vector<std::vector<std::string>> token_rows;
  for (const WordToken& tok : corpus.word_tokens) {
    const std::string& uid = tok.features.utterance_id;
    save_features(dir / "features" / (uid + ".feat"), tok.features);
    token_rows.push_back({tok.word, tok.speaker, "features/" + uid + ".feat"});
  }
  write_delimited(dir / "word_tokens.tsv", '\t', {"word", "speaker", "path"}, token_rows);

  write_annotations(dir / "annotations.tsv", corpus.annotations);
  write_alignments(dir / "alignments.tsv", corpus.alignments);
  write_target_words(dir / "targets.tsv", corpus.targets);
  write_text_file(dir / "dictionary.txt", corpus.dictionary_text);

  std::string lemma_lines;
  for (const auto& [word, lemma] : corpus.lemma_map) lemma_lines += word + "\t" + lemma + "\n";
  write_text_file(dir / "lemma_map.tsv", lemma_lines);
  write_text_file(dir / "transcripts.txt", corpus.transcripts_text);
}

std::vector<WordToken> load_word_tokens(const std::filesystem::path& dir) {
  auto rows = read_delimited(dir / "word_tokens.tsv", '\t');
  if (rows.empty() || rows.front() != std::vector<std::string>{"word", "speaker", "path"})
    throw std::runtime_error("word tokens: missing or malformed header in " +
                             (dir / "word_tokens.tsv").string());
  std::vector<WordToken> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3)
      throw std::runtime_error("word tokens: row " + std::to_string(i + 1) +
                               ": expected 3 columns");
    WordToken tok;
    tok.word = rows[i][0];
    tok.speaker = rows[i][1];
    tok.features = load_features(dir / rows[i][2]);
    out.push_back(std::move(tok));
  }
  return out;
}

ImageFeatures load_split_images(const std::filesystem::path& dir, const std::string& split) {
  auto manifest = parse_manifest(dir / "manifest.tsv");
  std::map<std::string, std::string> path_of;  // image id -> relative path
  for (const ManifestEntry& e : manifest) {
    if (!split.empty() && e.split != split) continue;
    std::string stem = std::filesystem::path(e.image_path).stem().string();
    path_of.emplace(stem, e.image_path);
  }
  ImageFeatures out;
  for (const auto& [id, rel] : path_of) {
    out.ids.push_back(id);
    out.vectors.push_back(load_image_vector(dir / rel));
  }
  return out;
}

}  // namespace vgs
