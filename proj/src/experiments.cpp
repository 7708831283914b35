#include "vgs/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vgs/io.hpp"

namespace vgs {

namespace {

std::vector<std::string> tsv_fields(const std::string& line, std::size_t expected,
                                    const char* what, int line_no) {
  std::vector<std::string> fields = split_on(line, '\t');
  if (fields.size() != expected) {
    std::ostringstream msg;
    msg << what << ": line " << line_no << " has " << fields.size() << " fields, expected "
        << expected;
    throw std::runtime_error(msg.str());
  }
  return fields;
}

double parse_seconds(const std::string& s, const char* what, int line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    std::ostringstream msg;
    msg << what << ": line " << line_no << " has a malformed number: " << s;
    throw std::runtime_error(msg.str());
  }
}

const std::vector<std::string> kMorphologies = {"singular", "plural", "root", "third",
                                                "participle"};

void check_morphology(const std::string& m, const char* what) {
  if (std::find(kMorphologies.begin(), kMorphologies.end(), m) == kMorphologies.end())
    throw std::runtime_error(std::string(what) + ": unknown morphology " + m);
}

// Trials keyed for deterministic merges.
bool trial_before(const TrialRecord& a, const TrialRecord& b) {
  return std::tie(a.lemma, a.word, a.speaker, a.gate, a.model_seed) <
         std::tie(b.lemma, b.word, b.speaker, b.gate, b.model_seed);
}

Tensor encode_token(const WordToken& token, const Matrix& frames, const ParamStore& params,
                    const ModelConfig& cfg, VqSession* vq) {
  (void)token;
  if (vq != nullptr) vq->clear();
  return encode_caption(frames, params, cfg, vq);
}

struct Predictors {
  double speaking_rate = 0.0;
  int n_vowels = 0;
  int n_consonants = 0;
  int density = 0;
  int phone_count = 0;
};

Predictors word_predictors(const std::string& word, const PronDict& dict,
                           const FeatureSequence& features) {
  const PhoneSeq& phones = dict.phones(word);
  Predictors p;
  p.phone_count = static_cast<int>(phones.size());
  double duration_s = (features.frames.rows - 1) * features.shift_s + features.window_s;
  p.speaking_rate = speaking_rate(p.phone_count, duration_s);
  p.n_vowels = count_vowels(phones);
  p.n_consonants = count_consonants(phones);
  p.density = dict.neighbourhood_density(word);
  return p;
}

}  // namespace

std::string multiplicity_name(Multiplicity m) {
  switch (m) {
    case Multiplicity::single: return "single";
    case Multiplicity::multiple: return "multiple";
    case Multiplicity::na: return "n/a";
  }
  throw std::logic_error("multiplicity_name: bad value");
}

Multiplicity parse_multiplicity(const std::string& s) {
  if (s == "single") return Multiplicity::single;
  if (s == "multiple") return Multiplicity::multiple;
  if (s == "n/a") return Multiplicity::na;
  throw std::runtime_error("annotations: unknown multiplicity " + s);
}

bool AnnotationSet::depicts(const std::string& image_id, const std::string& referent) const {
  auto it = by_image.find(image_id);
  return it != by_image.end() && it->second.count(referent) != 0;
}

Multiplicity AnnotationSet::multiplicity(const std::string& image_id,
                                         const std::string& referent) const {
  auto it = by_image.find(image_id);
  if (it == by_image.end())
    throw std::invalid_argument("annotations: unknown image " + image_id);
  auto jt = it->second.find(referent);
  if (jt == it->second.end())
    throw std::invalid_argument("annotations: image " + image_id + " does not depict " + referent);
  return jt->second;
}

int AnnotationSet::positive_count(const std::vector<std::string>& image_ids,
                                  const std::string& referent) const {
  int n = 0;
  for (const std::string& id : image_ids)
    if (depicts(id, referent)) ++n;
  return n;
}

int AnnotationSet::positive_count(const std::vector<std::string>& image_ids,
                                  const std::string& referent, Multiplicity m) const {
  int n = 0;
  for (const std::string& id : image_ids)
    if (depicts(id, referent) && multiplicity(id, referent) == m) ++n;
  return n;
}

AnnotationSet parse_annotations(std::istream& in) {
  AnnotationSet ann;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = tsv_fields(line, 3, "annotations", line_no);
    ann.by_image[f[0]][f[1]] = parse_multiplicity(f[2]);
  }
  return ann;
}

void write_annotations(const std::filesystem::path& path, const AnnotationSet& ann) {
  std::ostringstream out;
  for (const auto& [image, words] : ann.by_image)
    for (const auto& [word, m] : words)
      out << image << '\t' << word << '\t' << multiplicity_name(m) << '\n';
  write_text_file(path, out.str());
}

AlignmentTable parse_alignments(std::istream& in) {
  AlignmentTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = tsv_fields(line, 4, "alignments", line_no);
    PhoneInterval iv{f[1], parse_seconds(f[2], "alignments", line_no),
                     parse_seconds(f[3], "alignments", line_no)};
    if (!(iv.start_s < iv.end_s)) {
      std::ostringstream msg;
      msg << "alignments: line " << line_no << " has an empty or reversed interval";
      throw std::runtime_error(msg.str());
    }
    std::vector<PhoneInterval>& ivs = table[f[0]];
    if (!ivs.empty() && iv.start_s < ivs.back().end_s) {
      std::ostringstream msg;
      msg << "alignments: line " << line_no << " overlaps or precedes the previous interval of "
          << f[0];
      throw std::runtime_error(msg.str());
    }
    ivs.push_back(iv);
  }
  return table;
}

void write_alignments(const std::filesystem::path& path, const AlignmentTable& table) {
  std::ostringstream out;
  for (const auto& [utt, ivs] : table)
    for (const PhoneInterval& iv : ivs)
      out << utt << '\t' << iv.phone << '\t' << format_double(iv.start_s) << '\t'
          << format_double(iv.end_s) << '\n';
  write_text_file(path, out.str());
}

std::vector<TargetWord> parse_target_words(std::istream& in) {
  std::vector<TargetWord> words;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = tsv_fields(line, 4, "target words", line_no);
    if (f[2] != "noun" && f[2] != "verb") {
      std::ostringstream msg;
      msg << "target words: line " << line_no << " has unknown class " << f[2];
      throw std::runtime_error(msg.str());
    }
    check_morphology(f[3], "target words");
    words.push_back(TargetWord{f[0], f[1], f[2], f[3]});
  }
  return words;
}

void write_target_words(const std::filesystem::path& path, const std::vector<TargetWord>& words) {
  std::ostringstream out;
  for (const TargetWord& w : words)
    out << w.word << '\t' << w.lemma << '\t' << w.word_class << '\t' << w.morphology << '\n';
  write_text_file(path, out.str());
}

namespace {

const std::vector<std::string> kTrialHeader = {
    "lemma",       "word",       "morphology",  "speaker",     "model_seed", "vq",
    "gate",        "p10_hits",   "speaking_rate", "duration_frames", "lemma_count",
    "word_count",  "n_vowels",   "n_consonants", "density",    "cohort"};

}  // namespace

void write_trials_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& trials) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(trials.size());
  for (const TrialRecord& t : trials) {
    rows.push_back({t.lemma, t.word, t.morphology, t.speaker, std::to_string(t.model_seed),
                    t.vq ? "1" : "0", std::to_string(t.gate), std::to_string(t.p10_hits),
                    format_double(t.speaking_rate), std::to_string(t.duration_frames),
                    std::to_string(t.lemma_count), std::to_string(t.word_count),
                    std::to_string(t.n_vowels), std::to_string(t.n_consonants),
                    std::to_string(t.density), std::to_string(t.cohort)});
  }
  write_delimited(path, ',', kTrialHeader, rows);
}

std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows = read_delimited(path, ',');
  if (rows.empty() || rows[0] != kTrialHeader)
    throw std::runtime_error("trial csv: missing or malformed header in " + path.string());
  std::vector<TrialRecord> trials;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::vector<std::string>& f = rows[i];
    if (f.size() != kTrialHeader.size())
      throw std::runtime_error("trial csv: line " + std::to_string(i + 1) + " has " +
                               std::to_string(f.size()) + " fields");
    TrialRecord t;
    t.lemma = f[0];
    t.word = f[1];
    t.morphology = f[2];
    check_morphology(t.morphology, "trial csv");
    t.speaker = f[3];
    t.model_seed = std::stoull(f[4]);
    t.vq = f[5] == "1";
    t.gate = std::stoi(f[6]);
    t.p10_hits = std::stoi(f[7]);
    t.speaking_rate = std::stod(f[8]);
    t.duration_frames = std::stoi(f[9]);
    t.lemma_count = std::stoi(f[10]);
    t.word_count = std::stoi(f[11]);
    t.n_vowels = std::stoi(f[12]);
    t.n_consonants = std::stoi(f[13]);
    t.density = std::stoi(f[14]);
    t.cohort = std::stoi(f[15]);
    trials.push_back(std::move(t));
  }
  return trials;
}

ImageSet embed_images(const ImageFeatures& images, const ParamStore& params,
                      const ModelConfig& cfg) {
  if (images.ids.size() != images.vectors.size())
    throw std::invalid_argument("embed_images: id and vector counts differ");
  std::vector<std::size_t> order(images.ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return images.ids[a] < images.ids[b]; });

  NoGradGuard guard;
  ImageSet set;
  set.ids.reserve(order.size());
  set.embeddings = Matrix(static_cast<int>(order.size()), cfg.embed_dim());
  for (std::size_t i = 0; i < order.size(); ++i) {
    set.ids.push_back(images.ids[order[i]]);
    Tensor e = encode_image(images.vectors[order[i]], params, cfg);
    std::copy(e.values().begin(), e.values().end(),
              set.embeddings.row(static_cast<int>(i)).begin());
  }
  return set;
}

std::vector<std::string> top_images(const std::vector<double>& query, const ImageSet& images,
                                    int k) {
  if (static_cast<int>(images.ids.size()) < k)
    throw std::invalid_argument("top_images: only " + std::to_string(images.ids.size()) +
                                " candidates for top-" + std::to_string(k));
  int n = images.embeddings.rows;
  std::vector<double> sims(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    std::span<const double> row = images.embeddings.row(i);
    double s = 0.0;
    for (std::size_t d = 0; d < query.size(); ++d) s += query[d] * row[d];
    sims[static_cast<std::size_t>(i)] = s;
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  // ids are sorted ascending, so index order doubles as id order for ties.
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
    double sa = sims[static_cast<std::size_t>(a)], sb = sims[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  std::vector<std::string> top;
  top.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    top.push_back(images.ids[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  return top;
}

int precision_at_10(const std::vector<double>& query, const ImageSet& images,
                    const AnnotationSet& ann, const std::string& referent) {
  int hits = 0;
  for (const std::string& id : top_images(query, images, 10))
    if (ann.depicts(id, referent)) ++hits;
  return hits;
}

RecognitionRun run_word_recognition(const ParamStore& params, const ModelConfig& cfg,
                                    VqSession* vq, std::uint64_t model_seed, bool vq_flag,
                                    const std::vector<WordToken>& tokens,
                                    const std::vector<TargetWord>& targets,
                                    const ImageFeatures& images, const AnnotationSet& ann,
                                    const PronDict& dict, const TranscriptCounts& counts) {
  ImageSet set = embed_images(images, params, cfg);
  RecognitionRun run;
  NoGradGuard guard;
  for (const TargetWord& target : targets) {
    if (!dict.has(target.word)) {
      run.skipped.push_back("word " + target.word + ": not in the dictionary");
      continue;
    }
    int positives = ann.positive_count(set.ids, target.lemma);
    if (positives < 10) {
      run.skipped.push_back("word " + target.word + ": " + std::to_string(positives) +
                            " positive images, needs 10");
      continue;
    }
    bool recorded = false;
    for (const WordToken& token : tokens) {
      if (token.word != target.word) continue;
      recorded = true;
      Tensor emb = encode_token(token, token.features.frames, params, cfg, vq);
      Predictors p = word_predictors(target.word, dict, token.features);

      TrialRecord t;
      t.lemma = target.lemma;
      t.word = target.word;
      t.morphology = target.morphology;
      t.speaker = token.speaker;
      t.model_seed = model_seed;
      t.vq = vq_flag;
      t.gate = 0;
      t.p10_hits = precision_at_10(emb.values(), set, ann, target.lemma);
      t.speaking_rate = p.speaking_rate;
      t.duration_frames = token.features.frames.rows;
      t.lemma_count = counts.lemma_count(target.lemma);
      t.word_count = counts.word_count(target.word);
      t.n_vowels = p.n_vowels;
      t.n_consonants = p.n_consonants;
      t.density = p.density;
      t.cohort = dict.initial_cohort_size({dict.phones(target.word)[0]});
      run.trials.push_back(std::move(t));
    }
    if (!recorded) run.skipped.push_back("word " + target.word + ": no recording");
  }
  std::stable_sort(run.trials.begin(), run.trials.end(), trial_before);
  return run;
}

double mean_hits(const std::vector<TrialRecord>& trials) {
  if (trials.empty()) throw std::invalid_argument("mean_hits: no trials");
  double s = 0.0;
  for (const TrialRecord& t : trials) s += t.p10_hits;
  return s / static_cast<double>(trials.size());
}

std::map<std::string, double> mean_hits_by_morphology(const std::vector<TrialRecord>& trials) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const TrialRecord& t : trials) {
    acc[t.morphology].first += t.p10_hits;
    acc[t.morphology].second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [m, sc] : acc) out[m] = sc.first / sc.second;
  return out;
}

std::map<std::string, double> random_baseline(int n_models, std::uint64_t seed,
                                              const ModelConfig& cfg,
                                              const std::vector<WordToken>& tokens,
                                              const std::vector<TargetWord>& targets,
                                              const ImageFeatures& images,
                                              const AnnotationSet& ann) {
  if (n_models < 1) throw std::invalid_argument("random_baseline: need at least one model");
  // Predictors are irrelevant here; a throwaway dictionary and empty counts
  // keep run_word_recognition happy.
  PronDict stub;
  for (const TargetWord& target : targets)
    if (!stub.has(target.word)) stub.insert(target.word, {"K"});
  TranscriptCounts no_counts;
  std::map<std::string, std::pair<double, int>> acc;
  for (int k = 0; k < n_models; ++k) {
    std::uint64_t model_seed = derive_seed(seed, "random-baseline:" + std::to_string(k));
    ParamStore params = init_params(cfg, model_seed);
    RecognitionRun run = run_word_recognition(params, cfg, nullptr, model_seed, false, tokens,
                                              targets, images, ann, stub, no_counts);
    for (const TrialRecord& t : run.trials) {
      acc[t.word].first += t.p10_hits;
      acc[t.word].second += 1;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [word, sc] : acc) out[word] = sc.first / sc.second;
  return out;
}

NaiveBaseline naive_baseline(const std::vector<std::string>& image_ids, const AnnotationSet& ann,
                             const std::vector<TargetWord>& targets,
                             const std::string& word_class) {
  std::vector<std::string> class_lemmas;
  for (const TargetWord& t : targets)
    if (t.word_class == word_class) class_lemmas.push_back(t.lemma);
  std::sort(class_lemmas.begin(), class_lemmas.end());
  class_lemmas.erase(std::unique(class_lemmas.begin(), class_lemmas.end()), class_lemmas.end());
  if (class_lemmas.empty())
    throw std::invalid_argument("naive_baseline: no targets of class " + word_class);
  if (image_ids.size() < 10)
    throw std::invalid_argument("naive_baseline: fewer than ten images");

  std::vector<std::string> ids = image_ids;
  std::sort(ids.begin(), ids.end());
  auto referent_count = [&](const std::string& id) {
    int n = 0;
    for (const std::string& lemma : class_lemmas)
      if (ann.depicts(id, lemma)) ++n;
    return n;
  };
  std::stable_sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
    int ca = referent_count(a), cb = referent_count(b);
    if (ca != cb) return ca > cb;
    return a < b;
  });

  NaiveBaseline nb;
  nb.fixed_set.assign(ids.begin(), ids.begin() + 10);
  for (const std::string& lemma : class_lemmas) {
    if (ann.positive_count(image_ids, lemma) < 10) continue;
    int hits = 0;
    for (const std::string& id : nb.fixed_set)
      if (ann.depicts(id, lemma)) ++hits;
    for (const TargetWord& t : targets)
      if (t.word_class == word_class && t.lemma == lemma) nb.hits_per_word[t.word] = hits;
  }
  return nb;
}

Matrix gate_prefix(const FeatureSequence& features, const std::vector<PhoneInterval>& phones,
                   int gate) {
  if (gate < 1 || gate > static_cast<int>(phones.size()))
    throw std::invalid_argument("gate_prefix: gate " + std::to_string(gate) + " outside 1.." +
                                std::to_string(phones.size()));
  FrameRange r = frames_for_interval(features, 0.0, phones[static_cast<std::size_t>(gate - 1)].end_s);
  return take_rows(features.frames, r.end);
}

RecognitionRun run_gating(const ParamStore& params, const ModelConfig& cfg, VqSession* vq,
                          std::uint64_t model_seed, bool vq_flag,
                          const std::vector<WordToken>& tokens,
                          const std::vector<TargetWord>& targets, const ImageFeatures& images,
                          const AnnotationSet& ann, const AlignmentTable& alignments,
                          const PronDict& dict, const TranscriptCounts& counts) {
  ImageSet set = embed_images(images, params, cfg);
  RecognitionRun run;
  NoGradGuard guard;
  for (const TargetWord& target : targets) {
    if (!dict.has(target.word)) {
      run.skipped.push_back("word " + target.word + ": not in the dictionary");
      continue;
    }
    int positives = ann.positive_count(set.ids, target.lemma);
    if (positives < 10) {
      run.skipped.push_back("word " + target.word + ": " + std::to_string(positives) +
                            " positive images, needs 10");
      continue;
    }
    for (const WordToken& token : tokens) {
      if (token.word != target.word) continue;
      auto at = alignments.find(token.features.utterance_id);
      if (at == alignments.end() || at->second.empty()) {
        run.skipped.push_back("word " + target.word + " (" + token.features.utterance_id +
                              "): no alignment");
        continue;
      }
      const std::vector<PhoneInterval>& phones = at->second;
      Predictors p = word_predictors(target.word, dict, token.features);

      PhoneSeq prefix;
      for (int gate = 1; gate <= static_cast<int>(phones.size()); ++gate) {
        prefix.push_back(phones[static_cast<std::size_t>(gate - 1)].phone);
        Matrix presented = gate_prefix(token.features, phones, gate);
        if (presented.rows == 0) {
          run.skipped.push_back("word " + target.word + " (" + token.features.utterance_id +
                                "): gate " + std::to_string(gate) + " presents no frames");
          continue;
        }
        Tensor emb = encode_token(token, presented, params, cfg, vq);

        TrialRecord t;
        t.lemma = target.lemma;
        t.word = target.word;
        t.morphology = target.morphology;
        t.speaker = token.speaker;
        t.model_seed = model_seed;
        t.vq = vq_flag;
        t.gate = gate;
        t.p10_hits = precision_at_10(emb.values(), set, ann, target.lemma);
        t.speaking_rate = p.speaking_rate;
        t.duration_frames = presented.rows;
        t.lemma_count = counts.lemma_count(target.lemma);
        t.word_count = counts.word_count(target.word);
        t.n_vowels = p.n_vowels;
        t.n_consonants = p.n_consonants;
        t.density = p.density;
        t.cohort = dict.initial_cohort_size(prefix);
        run.trials.push_back(std::move(t));
      }
    }
  }
  std::stable_sort(run.trials.begin(), run.trials.end(), trial_before);
  return run;
}

PluralityTable plurality_confusion(const ParamStore& params, const ModelConfig& cfg,
                                   VqSession* vq, const std::vector<WordToken>& tokens,
                                   const std::vector<TargetWord>& targets,
                                   const ImageFeatures& images, const AnnotationSet& ann,
                                   const PronDict& dict, bool penultimate_gate,
                                   const AlignmentTable* alignments) {
  if (penultimate_gate && alignments == nullptr)
    throw std::invalid_argument("plurality_confusion: the gated variant needs alignments");

  // lemma -> its singular and plural noun forms.
  std::map<std::string, std::map<std::string, std::string>> forms;
  for (const TargetWord& t : targets)
    if (t.word_class == "noun" && (t.morphology == "singular" || t.morphology == "plural"))
      forms[t.lemma][t.morphology] = t.word;

  ImageSet set = embed_images(images, params, cfg);
  PluralityTable table;
  NoGradGuard guard;
  for (const auto& [lemma, by_morph] : forms) {
    auto sing = by_morph.find("singular");
    auto plur = by_morph.find("plural");
    if (sing == by_morph.end() || plur == by_morph.end()) {
      table.skipped.push_back("lemma " + lemma + ": missing a form");
      continue;
    }
    int singles = ann.positive_count(set.ids, lemma, Multiplicity::single);
    int multiples = ann.positive_count(set.ids, lemma, Multiplicity::multiple);
    if (singles < 10 || multiples < 10) {
      table.skipped.push_back("lemma " + lemma + ": " + std::to_string(singles) + " single / " +
                              std::to_string(multiples) + " multiple images, needs 10 of each");
      continue;
    }
    if (penultimate_gate) {
      const PhoneSeq& sp = dict.phones(sing->second);
      const PhoneSeq& pp = dict.phones(plur->second);
      bool regular = pp.size() > sp.size() && std::equal(sp.begin(), sp.end(), pp.begin());
      if (!regular) {
        table.skipped.push_back("lemma " + lemma + ": irregular plural " + plur->second +
                                ", excluded from the gated analysis");
        continue;
      }
    }

    for (int is_plural = 0; is_plural < 2; ++is_plural) {
      const std::string& word = is_plural ? plur->second : sing->second;
      for (const WordToken& token : tokens) {
        if (token.word != word) continue;
        Matrix presented = token.features.frames;
        if (penultimate_gate) {
          auto at = alignments->find(token.features.utterance_id);
          if (at == alignments->end() || at->second.size() < 2) {
            table.skipped.push_back("word " + word + " (" + token.features.utterance_id +
                                    "): no usable alignment for the penultimate gate");
            continue;
          }
          presented = gate_prefix(token.features, at->second,
                                  static_cast<int>(at->second.size()) - 1);
          if (presented.rows == 0) {
            table.skipped.push_back("word " + word + " (" + token.features.utterance_id +
                                    "): penultimate gate presents no frames");
            continue;
          }
        }
        Tensor emb = encode_token(token, presented, params, cfg, vq);
        for (const std::string& id : top_images(emb.values(), set, 10)) {
          if (!ann.depicts(id, lemma)) continue;
          Multiplicity m = ann.multiplicity(id, lemma);
          if (m == Multiplicity::na) continue;  // undefined for this referent; not countable
          table.counts[is_plural][m == Multiplicity::multiple ? 1 : 0] += 1;
        }
      }
    }
  }
  return table;
}

double chi_square_2x2(long long a, long long b, long long c, long long d,
                      bool continuity_correction) {
  if (a < 0 || b < 0 || c < 0 || d < 0)
    throw std::invalid_argument("chi_square_2x2: negative count");
  long long r0 = a + b, r1 = c + d, c0 = a + c, c1 = b + d;
  if (r0 == 0 || r1 == 0 || c0 == 0 || c1 == 0)
    throw std::invalid_argument("chi_square_2x2: zero marginal");
  double n = static_cast<double>(a + b + c + d);
  double det = static_cast<double>(a) * static_cast<double>(d) -
               static_cast<double>(b) * static_cast<double>(c);
  double mag = std::fabs(det);
  if (continuity_correction) mag = std::max(0.0, mag - n / 2.0);
  return n * mag * mag / (static_cast<double>(r0) * static_cast<double>(r1) *
                          static_cast<double>(c0) * static_cast<double>(c1));
}

double chi_square_2x2(const PluralityTable& table, bool continuity_correction) {
  return chi_square_2x2(table.counts[0][0], table.counts[0][1], table.counts[1][0],
                        table.counts[1][1], continuity_correction);
}

namespace {

struct ColumnStats {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 flags a degenerate column
};

ColumnStats column_stats(const std::vector<double>& xs) {
  ColumnStats st;
  for (double x : xs) st.mean += x;
  st.mean /= static_cast<double>(xs.size());
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - st.mean) * (x - st.mean);
    st.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return st;
}

}  // namespace

GlmmTable export_glmm_table(const std::vector<TrialRecord>& trials) {
  if (trials.empty()) throw std::invalid_argument("glmm export: no trials");

  std::vector<std::string> speakers;
  for (const TrialRecord& t : trials) {
    check_morphology(t.morphology, "glmm export");
    speakers.push_back(t.speaker);
  }
  std::sort(speakers.begin(), speakers.end());
  speakers.erase(std::unique(speakers.begin(), speakers.end()), speakers.end());
  if (speakers.size() != 2)
    throw std::invalid_argument("glmm export: effect coding expects exactly two speakers, got " +
                                std::to_string(speakers.size()));

  std::size_t n = trials.size();
  // Standardised predictors, with counts log-transformed first.
  std::vector<std::pair<std::string, std::vector<double>>> z_cols = {
      {"speaking_rate_z", {}}, {"duration_frames_z", {}}, {"log_lemma_count_z", {}},
      {"log_word_count_z", {}}, {"density_z", {}},        {"cohort_z", {}}};
  // Centered-only predictors.
  std::vector<std::pair<std::string, std::vector<double>>> c_cols = {
      {"n_vowels_c", {}}, {"n_consonants_c", {}}, {"gate_c", {}}};
  for (auto& [name, v] : z_cols) v.reserve(n);
  for (auto& [name, v] : c_cols) v.reserve(n);
  for (const TrialRecord& t : trials) {
    z_cols[0].second.push_back(t.speaking_rate);
    z_cols[1].second.push_back(t.duration_frames);
    z_cols[2].second.push_back(std::log1p(static_cast<double>(t.lemma_count)));
    z_cols[3].second.push_back(std::log1p(static_cast<double>(t.word_count)));
    z_cols[4].second.push_back(t.density);
    z_cols[5].second.push_back(t.cohort);
    c_cols[0].second.push_back(t.n_vowels);
    c_cols[1].second.push_back(t.n_consonants);
    c_cols[2].second.push_back(t.gate);
  }

  GlmmTable table;
  table.header = {"lemma",        "word",          "morphology",   "speaker",
                  "model_seed",   "vq",            "gate",         "hits",
                  "failures",     "speaking_rate", "duration_frames", "lemma_count",
                  "word_count",   "n_vowels",      "n_consonants", "density",
                  "cohort"};
  std::vector<std::vector<double>> transformed;
  for (auto& [name, xs] : z_cols) {
    ColumnStats st = column_stats(xs);
    std::vector<double> out(n);
    if (st.sd == 0.0) {
      table.header.push_back(name + "_zerovar");
      for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] - st.mean;
    } else {
      table.header.push_back(name);
      for (std::size_t i = 0; i < n; ++i) out[i] = (xs[i] - st.mean) / st.sd;
    }
    transformed.push_back(std::move(out));
  }
  for (auto& [name, xs] : c_cols) {
    ColumnStats st = column_stats(xs);
    table.header.push_back(name);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] - st.mean;
    transformed.push_back(std::move(out));
  }
  table.header.insert(table.header.end(), {"morph_plural", "morph_root", "morph_third",
                                           "morph_participle", "speaker_effect"});

  for (std::size_t i = 0; i < n; ++i) {
    const TrialRecord& t = trials[i];
    std::vector<std::string> row = {t.lemma,
                                    t.word,
                                    t.morphology,
                                    t.speaker,
                                    std::to_string(t.model_seed),
                                    t.vq ? "1" : "0",
                                    std::to_string(t.gate),
                                    std::to_string(t.p10_hits),
                                    std::to_string(10 - t.p10_hits),
                                    format_double(t.speaking_rate),
                                    std::to_string(t.duration_frames),
                                    std::to_string(t.lemma_count),
                                    std::to_string(t.word_count),
                                    std::to_string(t.n_vowels),
                                    std::to_string(t.n_consonants),
                                    std::to_string(t.density),
                                    std::to_string(t.cohort)};
    for (const std::vector<double>& col : transformed) row.push_back(format_double(col[i]));
    row.push_back(t.morphology == "plural" ? "1" : "0");
    row.push_back(t.morphology == "root" ? "1" : "0");
    row.push_back(t.morphology == "third" ? "1" : "0");
    row.push_back(t.morphology == "participle" ? "1" : "0");
    row.push_back(t.speaker == speakers[0] ? "-1" : "1");
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_glmm_csv(const std::filesystem::path& path, const GlmmTable& table) {
  write_delimited(path, ',', table.header, table.rows);
}

std::vector<GatingCurvePoint> gating_curve(const std::vector<TrialRecord>& trials) {
  std::map<std::string, int> word_length;
  for (const TrialRecord& t : trials)
    if (t.gate > 0) word_length[t.word] = std::max(word_length[t.word], t.gate);

  std::map<std::pair<int, int>, std::pair<double, int>> acc;
  for (const TrialRecord& t : trials) {
    if (t.gate == 0) continue;
    auto& slot = acc[{word_length[t.word], t.gate}];
    slot.first += t.p10_hits;
    slot.second += 1;
  }
  std::vector<GatingCurvePoint> curve;
  for (const auto& [key, sc] : acc)
    curve.push_back(GatingCurvePoint{key.first, key.second, sc.first / sc.second, sc.second});
  return curve;
}

}  // namespace vgs
