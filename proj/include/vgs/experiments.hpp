#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "vgs/audio.hpp"
#include "vgs/lexicon.hpp"
#include "vgs/model.hpp"
#include "vgs/param_store.hpp"
#include "vgs/vq.hpp"

namespace vgs {

enum class Multiplicity { single, multiple, na };
std::string multiplicity_name(Multiplicity m);
Multiplicity parse_multiplicity(const std::string& s);

// Per-image referent annotations: which words an image depicts and whether a
// noun referent occurs once or several times.
struct AnnotationSet {
  std::map<std::string, std::map<std::string, Multiplicity>> by_image;

  bool depicts(const std::string& image_id, const std::string& referent) const;
  Multiplicity multiplicity(const std::string& image_id, const std::string& referent) const;
  // Images in `image_ids` annotated with the referent.
  int positive_count(const std::vector<std::string>& image_ids, const std::string& referent) const;
  int positive_count(const std::vector<std::string>& image_ids, const std::string& referent,
                     Multiplicity m) const;
};

struct PhoneInterval {
  std::string phone;
  double start_s = 0.0;
  double end_s = 0.0;
};

// utterance id -> ordered, non-overlapping phone intervals.
using AlignmentTable = std::map<std::string, std::vector<PhoneInterval>>;

struct TargetWord {
  std::string word;        // surface form
  std::string lemma;
  std::string word_class;  // noun | verb
  std::string morphology;  // singular | plural | root | third | participle
};

// One isolated-word recording. The feature sequence's utterance id keys into
// the alignment table.
struct WordToken {
  std::string word;
  std::string speaker;
  FeatureSequence features;
};

// One recognition or gating trial; gate 0 means the full word was presented.
// Counts are raw occurrence counts; exports add the log transforms.
struct TrialRecord {
  std::string lemma;
  std::string word;
  std::string morphology;
  std::string speaker;
  std::uint64_t model_seed = 0;
  bool vq = false;
  int gate = 0;
  int p10_hits = 0;
  double speaking_rate = 0.0;
  int duration_frames = 0;
  int lemma_count = 0;
  int word_count = 0;
  int n_vowels = 0;
  int n_consonants = 0;
  int density = 0;
  int cohort = 0;  // dictionary cohort of the presented phone prefix
};

// TSV image_id, word, multiplicity(single|multiple|n/a); line-numbered errors.
AnnotationSet parse_annotations(std::istream& in);
void write_annotations(const std::filesystem::path& path, const AnnotationSet& ann);

// TSV utterance_id, phone, start_s, end_s; rejects unordered or overlapping
// intervals.
AlignmentTable parse_alignments(std::istream& in);
void write_alignments(const std::filesystem::path& path, const AlignmentTable& table);

// TSV word, lemma, class(noun|verb), morphology.
std::vector<TargetWord> parse_target_words(std::istream& in);
void write_target_words(const std::filesystem::path& path, const std::vector<TargetWord>& words);

void write_trials_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& trials);
std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path);

// A frozen model's image embeddings with ids sorted ascending so similarity
// ties resolve deterministically.
struct ImageSet {
  std::vector<std::string> ids;
  Matrix embeddings;
};

struct ImageFeatures {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vectors;
};

ImageSet embed_images(const ImageFeatures& images, const ParamStore& params,
                      const ModelConfig& cfg);

// Ids of the k images most similar to the query by dot product, ties broken
// by ascending id.
std::vector<std::string> top_images(const std::vector<double>& query, const ImageSet& images,
                                    int k);

// Of the ten highest-ranked images, how many are annotated with the referent
// (any multiplicity). Errors when fewer than ten candidate images exist;
// callers enforce the >= 10 positive-image eligibility rule.
int precision_at_10(const std::vector<double>& query, const ImageSet& images,
                    const AnnotationSet& ann, const std::string& referent);

struct RecognitionRun {
  std::vector<TrialRecord> trials;
  std::vector<std::string> skipped;  // one line per excluded word or missing recording
};

// Full-word recognition over every (eligible target word, recorded speaker):
// encodes each isolated recording, scores precision-at-10 against its lemma,
// and attaches the lexical predictors. Words with fewer than ten positive
// images and missing recordings are skipped with a note.
RecognitionRun run_word_recognition(const ParamStore& params, const ModelConfig& cfg,
                                    VqSession* vq, std::uint64_t model_seed, bool vq_flag,
                                    const std::vector<WordToken>& tokens,
                                    const std::vector<TargetWord>& targets,
                                    const ImageFeatures& images, const AnnotationSet& ann,
                                    const PronDict& dict, const TranscriptCounts& counts);

double mean_hits(const std::vector<TrialRecord>& trials);
std::map<std::string, double> mean_hits_by_morphology(const std::vector<TrialRecord>& trials);

// Mean precision-at-10 per word over `n_models` untrained models drawn from
// the seed.
std::map<std::string, double> random_baseline(int n_models, std::uint64_t seed,
                                              const ModelConfig& cfg,
                                              const std::vector<WordToken>& tokens,
                                              const std::vector<TargetWord>& targets,
                                              const ImageFeatures& images,
                                              const AnnotationSet& ann);

// Query-independent baseline: the ten images depicting the most referents of
// the class (ties by ascending id) answer every word of that class.
struct NaiveBaseline {
  std::vector<std::string> fixed_set;
  std::map<std::string, int> hits_per_word;  // eligible words only
};
NaiveBaseline naive_baseline(const std::vector<std::string>& image_ids, const AnnotationSet& ann,
                             const std::vector<TargetWord>& targets,
                             const std::string& word_class);

// The feature-row prefix presented at a gate: all frames whose window centers
// fall before the end of phone `gate` (1-based). The features were normalized
// over the whole word once; a gate never re-normalizes, so gate g is a strict
// row prefix of gate g+1.
Matrix gate_prefix(const FeatureSequence& features, const std::vector<PhoneInterval>& phones,
                   int gate);

// One trial per (eligible word, speaker, gate 1..phone count). The cohort
// predictor at gate g counts dictionary words whose pronunciation starts with
// the first g aligned phones. Recordings without a usable alignment are
// skipped with a diagnostic.
RecognitionRun run_gating(const ParamStore& params, const ModelConfig& cfg, VqSession* vq,
                          std::uint64_t model_seed, bool vq_flag,
                          const std::vector<WordToken>& tokens,
                          const std::vector<TargetWord>& targets, const ImageFeatures& images,
                          const AnnotationSet& ann, const AlignmentTable& alignments,
                          const PronDict& dict, const TranscriptCounts& counts);

// Presented form x retrieved-referent multiplicity over correctly retrieved
// top-10 images.
struct PluralityTable {
  // [0] singular prompts, [1] plural prompts; columns: single, multiple.
  long long counts[2][2] = {{0, 0}, {0, 0}};
  std::vector<std::string> skipped;

  long long total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
};

// Nouns with both forms recorded and at least ten single-referent and ten
// multiple-referent images. With `penultimate_gate` every prompt is truncated
// at its second-to-last aligned phone, and plural forms whose pronunciation
// does not extend their singular's (irregular plurals, read off the
// dictionary) are excluded along with their singulars.
PluralityTable plurality_confusion(const ParamStore& params, const ModelConfig& cfg,
                                   VqSession* vq, const std::vector<WordToken>& tokens,
                                   const std::vector<TargetWord>& targets,
                                   const ImageFeatures& images, const AnnotationSet& ann,
                                   const PronDict& dict, bool penultimate_gate = false,
                                   const AlignmentTable* alignments = nullptr);

// Pearson chi-squared statistic of a 2x2 table, one degree of freedom;
// optional continuity correction. A zero row or column marginal is an error.
double chi_square_2x2(long long a, long long b, long long c, long long d,
                      bool continuity_correction = false);
double chi_square_2x2(const PluralityTable& table, bool continuity_correction = false);

// Regression-ready export. Fixed column order: identifiers and raw
// predictors first, then transformed columns, then coding columns.
// Transforms: counts get ln(1 + x); vowel/consonant counts and gate are
// centered (_c columns); every other numeric predictor is z-standardised
// with the sample standard deviation (_z columns). A zero-variance column
// stays centered-only and its name gains a "_zerovar" suffix. Morphology is
// dummy coded against the singular reference; the two speakers are effect
// coded -1/+1 in ascending name order; vq is already a 0/1 dummy.
struct GlmmTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
GlmmTable export_glmm_table(const std::vector<TrialRecord>& trials);
void write_glmm_csv(const std::filesystem::path& path, const GlmmTable& table);

// Plot data: mean hits per (phone count of the word, gate) over gating
// trials, ordered by word length then gate.
struct GatingCurvePoint {
  int word_length = 0;
  int gate = 0;
  double mean_hits = 0.0;
  int n_trials = 0;
};
std::vector<GatingCurvePoint> gating_curve(const std::vector<TrialRecord>& trials);

}  // namespace vgs
