#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vgs/experiments.hpp"

namespace vgs {

// Desk-scale corpus: every word form owns a fixed random frame template and a
// fixed random pronunciation; images are per-lemma attribute vectors (1 for a
// single referent, 2 for multiple, plus noise); captions concatenate the
// templates of 2-4 of the image's referents with per-token noise; plural and
// third-person forms append one shared suffix-phone template. Two speakers
// differ by fixed offset vectors. Feature sequences are generated directly in
// feature space, so no signal processing or normalization applies, and every
// phone boundary lands half a frame shift away from the nearest window
// center.
struct SynthConfig {
  int vocab_size = 20;   // lemmas; each yields two surface forms
  int n_images = 200;
  int frames_per_word = 12;  // per-lemma jitter of +/-2 frames
  double noise_level = 0.15;
  std::uint64_t seed = 0;
  int feat_dim = 39;

  int image_dim() const { return vocab_size; }  // one attribute slot per lemma
  void validate() const;
};

// One caption paired with its image.
struct SynthItem {
  std::string id;
  std::string split;  // train | dev | test
  std::string image_id;
  std::string speaker;
  FeatureSequence caption;
  std::string transcript;  // space-joined surface forms
};

struct SynthCorpus {
  std::vector<SynthItem> items;
  std::vector<std::string> image_ids;  // ascending
  std::map<std::string, std::vector<double>> image_vectors;
  std::map<std::string, std::string> image_split;
  AnnotationSet annotations;
  AlignmentTable alignments;  // captions and isolated words alike
  std::vector<WordToken> word_tokens;  // one recording per (form, speaker)
  std::vector<TargetWord> targets;
  std::string dictionary_text;  // pronouncing-dictionary format
  std::map<std::string, std::string> lemma_map;
  std::string transcripts_text;  // training captions, one per line

  // Construction-time tally: lemma -> split -> images depicting it.
  std::map<std::string, std::map<std::string, int>> positives;
};

// Deterministic in cfg.seed. Errors when the vocabulary outgrows the set of
// distinct pronunciations the retry budget can draw.
SynthCorpus make_synthetic_corpus(const SynthConfig& cfg);

// Writes manifest.tsv, features/, images/, word_tokens.tsv, annotations.tsv,
// alignments.tsv, targets.tsv, dictionary.txt, lemma_map.tsv and
// transcripts.txt under `dir`, creating directories as needed.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

// Corpus-directory loaders for the written layout.
std::vector<WordToken> load_word_tokens(const std::filesystem::path& dir);
ImageFeatures load_split_images(const std::filesystem::path& dir, const std::string& split);

}  // namespace vgs
