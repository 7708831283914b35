#include "vgs/cli.hpp"

#include <algorithm>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vgs/experiments.hpp"
#include "vgs/io.hpp"
#include "vgs/synth.hpp"
#include "vgs/trainer.hpp"

namespace vgs {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ';');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

// --- Config file -------------------------------------------------------------

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j = json::parse(read_text_file(path));
  if (!j.is_object()) throw std::runtime_error("config: " + path + " is not a JSON object");
  return j;
}

// Unknown keys are rejected so typos cannot silently fall back to defaults.
// Keys echoed into resolved configs are accepted (and ignored as inputs), so
// a run's own config.json can seed the next run.
void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (allowed.count(it.key()) == 0)
      throw std::runtime_error("config: unknown key '" + it.key() + "' in " + section);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

const std::set<std::string> kRootKeys = {
    "model",     "train",    "synth",   "command",   "manifest",      "checkpoint",
    "corpus",    "out",      "seed",    "epochs",    "vq",            "split",
    "codebook1", "codebook2", "random_models", "penultimate", "trials", "ns"};

ModelConfig model_from_config(const json& root) {
  check_keys(root, "config", kRootKeys);
  json m = root.value("model", json::object());
  check_keys(m, "model", {"feat_dim", "image_feat_dim", "conv_channels", "conv_width",
                          "conv_stride", "lstm_layers", "lstm_hidden", "attn_dim", "vq"});
  ModelConfig cfg;
  cfg.feat_dim = get_or(m, "feat_dim", 0);  // 0: infer from the data
  cfg.image_feat_dim = get_or(m, "image_feat_dim", 0);
  cfg.conv_channels = get_or(m, "conv_channels", cfg.conv_channels);
  cfg.conv_width = get_or(m, "conv_width", cfg.conv_width);
  cfg.conv_stride = get_or(m, "conv_stride", cfg.conv_stride);
  cfg.lstm_layers = get_or(m, "lstm_layers", cfg.lstm_layers);
  cfg.lstm_hidden = get_or(m, "lstm_hidden", cfg.lstm_hidden);
  cfg.attn_dim = get_or(m, "attn_dim", cfg.attn_dim);
  json v = m.value("vq", json::object());
  check_keys(v, "model.vq", {"enabled", "codes_layer1", "codes_layer2", "gamma", "loss_weight"});
  cfg.vq.codes_layer1 = get_or(v, "codes_layer1", cfg.vq.codes_layer1);
  cfg.vq.codes_layer2 = get_or(v, "codes_layer2", cfg.vq.codes_layer2);
  cfg.vq.gamma = get_or(v, "gamma", cfg.vq.gamma);
  cfg.vq.loss_weight = get_or(v, "loss_weight", cfg.vq.loss_weight);
  return cfg;
}

TrainConfig train_from_config(const json& root) {
  json t = root.value("train", json::object());
  check_keys(t, "train", {"margin", "lr_min", "lr_max", "epochs", "batch_size", "cycle_epochs",
                          "vq_loss_weight", "seed", "vq_enabled"});
  TrainConfig cfg;
  cfg.margin = get_or(t, "margin", cfg.margin);
  cfg.lr_min = get_or(t, "lr_min", cfg.lr_min);
  cfg.lr_max = get_or(t, "lr_max", cfg.lr_max);
  cfg.epochs = get_or(t, "epochs", cfg.epochs);
  cfg.batch_size = get_or(t, "batch_size", cfg.batch_size);
  cfg.cycle_epochs = get_or(t, "cycle_epochs", cfg.cycle_epochs);
  cfg.vq_loss_weight = get_or(t, "vq_loss_weight", cfg.vq_loss_weight);
  return cfg;
}

SynthConfig synth_from_config(const json& root) {
  check_keys(root, "config", kRootKeys);
  json s = root.value("synth", json::object());
  check_keys(s, "synth",
             {"vocab_size", "n_images", "frames_per_word", "noise_level", "feat_dim", "seed"});
  SynthConfig cfg;
  cfg.vocab_size = get_or(s, "vocab_size", cfg.vocab_size);
  cfg.n_images = get_or(s, "n_images", cfg.n_images);
  cfg.frames_per_word = get_or(s, "frames_per_word", cfg.frames_per_word);
  cfg.noise_level = get_or(s, "noise_level", cfg.noise_level);
  cfg.feat_dim = get_or(s, "feat_dim", cfg.feat_dim);
  return cfg;
}

json model_to_json(const ModelConfig& cfg, bool vq_enabled) {
  return json{{"feat_dim", cfg.feat_dim},
              {"image_feat_dim", cfg.image_feat_dim},
              {"conv_channels", cfg.conv_channels},
              {"conv_width", cfg.conv_width},
              {"conv_stride", cfg.conv_stride},
              {"lstm_layers", cfg.lstm_layers},
              {"lstm_hidden", cfg.lstm_hidden},
              {"attn_dim", cfg.attn_dim},
              {"vq",
               json{{"enabled", vq_enabled},
                    {"codes_layer1", cfg.vq.codes_layer1},
                    {"codes_layer2", cfg.vq.codes_layer2},
                    {"gamma", cfg.vq.gamma},
                    {"loss_weight", cfg.vq.loss_weight}}}};
}

json train_to_json(const TrainConfig& cfg) {
  return json{{"margin", cfg.margin},
              {"lr_min", cfg.lr_min},
              {"lr_max", cfg.lr_max},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"cycle_epochs", cfg.cycle_epochs},
              {"seed", cfg.seed},
              {"vq_enabled", cfg.vq_enabled},
              {"vq_loss_weight", cfg.vq_loss_weight}};
}

json synth_to_json(const SynthConfig& cfg) {
  return json{{"vocab_size", cfg.vocab_size},   {"n_images", cfg.n_images},
              {"frames_per_word", cfg.frames_per_word}, {"noise_level", cfg.noise_level},
              {"seed", cfg.seed},               {"feat_dim", cfg.feat_dim}};
}

// --- Output directories --------------------------------------------------------

void ensure_out_dir(const fs::path& out, bool force) {
  if (fs::exists(out)) {
    if (!fs::is_directory(out))
      throw std::runtime_error("output path " + out.string() + " exists and is not a directory");
    if (!fs::is_empty(out) && !force)
      throw std::runtime_error("output directory " + out.string() +
                               " is not empty; pass --force to overwrite");
  }
  fs::create_directories(out);
}

void write_resolved_config(const fs::path& out, const json& resolved) {
  write_text_file(out / "config.json", resolved.dump(2) + "\n");
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const std::string& line : lines) {
    text += line;
    text += '\n';
  }
  write_text_file(path, text);
}

// --- Shared model plumbing ------------------------------------------------------

// Fills zero dimensions from the data and cross-checks explicit ones.
ModelConfig resolve_model(const json& cfg_root, int feat_dim, int image_dim, bool vq_enabled) {
  ModelConfig cfg = model_from_config(cfg_root);
  cfg.vq.enabled = vq_enabled;
  if (cfg.feat_dim == 0) cfg.feat_dim = feat_dim;
  if (cfg.feat_dim != feat_dim)
    throw std::runtime_error("model: configured feat_dim " + std::to_string(cfg.feat_dim) +
                             " does not match the data's " + std::to_string(feat_dim));
  if (cfg.image_feat_dim == 0) cfg.image_feat_dim = image_dim;
  if (cfg.image_feat_dim != image_dim)
    throw std::runtime_error("model: configured image_feat_dim " +
                             std::to_string(cfg.image_feat_dim) + " does not match the data's " +
                             std::to_string(image_dim));
  cfg.validate();
  return cfg;
}

void check_pair_dimensions(const std::vector<TrainPair>& pairs) {
  int feat = pairs.front().caption.frames.cols;
  std::size_t image = pairs.front().image.size();
  for (const TrainPair& p : pairs) {
    if (p.caption.frames.cols != feat)
      throw std::runtime_error("pairs: utterance " + p.caption.utterance_id + " has " +
                               std::to_string(p.caption.frames.cols) + " feature columns, expected " +
                               std::to_string(feat));
    if (p.image.size() != image)
      throw std::runtime_error("pairs: utterance " + p.caption.utterance_id +
                               " pairs an image of dimension " + std::to_string(p.image.size()) +
                               ", expected " + std::to_string(image));
  }
}

// Codebook pair for quantized evaluation; keeps ownership alongside the
// session that points into it.
struct VqHandles {
  Codebook layer1;
  Codebook layer2;
  std::optional<VqSession> session;

  VqSession* get() { return session ? &*session : nullptr; }
};

VqHandles make_vq(bool enabled, const std::string& cb1, const std::string& cb2,
                  const std::string& checkpoint) {
  VqHandles h;
  if (!enabled) return h;
  fs::path base = fs::path(checkpoint).parent_path();
  fs::path p1 = cb1.empty() ? base / "codebook1.bin" : fs::path(cb1);
  fs::path p2 = cb2.empty() ? base / "codebook2.bin" : fs::path(cb2);
  h.layer1 = load_codebook(p1);
  h.layer2 = load_codebook(p2);
  h.session.emplace(&h.layer1, &h.layer2, VqMode::active);
  return h;
}

// --- Experiment corpus inputs -----------------------------------------------------

struct ExperimentInputs {
  std::vector<WordToken> tokens;
  std::vector<TargetWord> targets;
  AnnotationSet annotations;
  AlignmentTable alignments;
  PronDict dict;
  TranscriptCounts counts;
  ImageFeatures images;
};

ExperimentInputs load_experiment_inputs(const fs::path& corpus, const std::string& split,
                                        bool need_alignments) {
  ExperimentInputs in;
  in.tokens = load_word_tokens(corpus);
  if (in.tokens.empty()) throw std::runtime_error("corpus: no word recordings in " + corpus.string());
  {
    std::istringstream s(read_text_file(corpus / "targets.tsv"));
    in.targets = parse_target_words(s);
  }
  {
    std::istringstream s(read_text_file(corpus / "annotations.tsv"));
    in.annotations = parse_annotations(s);
  }
  if (need_alignments) {
    std::istringstream s(read_text_file(corpus / "alignments.tsv"));
    in.alignments = parse_alignments(s);
  }
  {
    std::istringstream s(read_text_file(corpus / "dictionary.txt"));
    in.dict = parse_dictionary(s);
  }
  {
    std::istringstream lm(read_text_file(corpus / "lemma_map.tsv"));
    std::istringstream tr(read_text_file(corpus / "transcripts.txt"));
    in.counts = count_transcripts(tr, parse_lemma_map(lm));
  }
  in.images = load_split_images(corpus, split);
  if (in.images.ids.size() < 10)
    throw std::runtime_error("corpus: split '" + split + "' has " +
                             std::to_string(in.images.ids.size()) +
                             " images; ranking needs at least ten");
  return in;
}

void write_skipped(const fs::path& out, const std::vector<std::string>& skipped) {
  write_lines(out / "skipped.txt", skipped);
}

// --- Flag bundles -------------------------------------------------------------------

struct CommonArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool force = false;
};

struct CheckpointArgs {
  std::string checkpoint;
  bool vq = false;
  std::string codebook1;
  std::string codebook2;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_seed = true) {
  cmd->add_option("--config", a.config, "JSON config file");
  cmd->add_option("--out", a.out, "output directory")->required();
  if (with_seed) cmd->add_option("--seed", a.seed, "master seed for this run");
  cmd->add_flag("--force", a.force, "overwrite a non-empty output directory");
}

void add_checkpoint(CLI::App* cmd, CheckpointArgs& a) {
  cmd->add_option("--checkpoint", a.checkpoint, "trained parameter file")->required();
  cmd->add_flag("--vq", a.vq, "quantize with codebooks saved next to the checkpoint");
  cmd->add_option("--codebook1", a.codebook1, "first-layer codebook (with --vq)");
  cmd->add_option("--codebook2", a.codebook2, "second-layer codebook (with --vq)");
}

// --- Commands -------------------------------------------------------------------------

void cmd_synth(const CommonArgs& args) {
  json cfg_root = read_config(args.config);
  SynthConfig cfg = synth_from_config(cfg_root);
  cfg.seed = args.seed;
  cfg.validate();

  ensure_out_dir(args.out, args.force);
  SynthCorpus corpus = make_synthetic_corpus(cfg);
  write_corpus(corpus, args.out);
  write_resolved_config(args.out, json{{"command", "synth"},
                                       {"out", args.out},
                                       {"seed", args.seed},
                                       {"synth", synth_to_json(cfg)}});
}

void cmd_train(const CommonArgs& args, const std::string& manifest, const std::string& split,
               int epochs_override, bool vq) {
  json cfg_root = read_config(args.config);
  std::vector<TrainPair> pairs = load_pairs(manifest, split);
  if (pairs.empty())
    throw std::runtime_error("manifest: no pairs in split '" + split + "' of " + manifest);
  check_pair_dimensions(pairs);

  ModelConfig mcfg = resolve_model(cfg_root, pairs.front().caption.frames.cols,
                                   static_cast<int>(pairs.front().image.size()), vq);
  TrainConfig tcfg = train_from_config(cfg_root);
  tcfg.seed = args.seed;
  tcfg.vq_enabled = vq;
  if (epochs_override >= 0) tcfg.epochs = epochs_override;
  tcfg.validate();

  ensure_out_dir(args.out, args.force);
  fs::path out(args.out);
  write_resolved_config(out, json{{"command", "train"},
                                  {"manifest", manifest},
                                  {"split", split},
                                  {"out", args.out},
                                  {"seed", args.seed},
                                  {"vq", vq},
                                  {"model", model_to_json(mcfg, vq)},
                                  {"train", train_to_json(tcfg)}});

  TrainResult result = train(pairs, mcfg, tcfg);
  result.params.save(out / "checkpoint.bin");
  if (result.vq_active) {
    result.phase1_params.save(out / "checkpoint_phase1.bin");
    save_codebook(out / "codebook1.bin", result.layer1);
    save_codebook(out / "codebook2.bin", result.layer2);
  }

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < result.epoch_loss.size(); ++i) {
    int phase = result.vq_active && i >= static_cast<std::size_t>(tcfg.epochs) ? 2 : 1;
    rows.push_back({std::to_string(i), std::to_string(phase), format_double(result.epoch_loss[i])});
  }
  write_delimited(out / "loss_trace.csv", ',', {"epoch", "phase", "mean_loss"}, rows);
}

void cmd_eval(const CommonArgs& args, const CheckpointArgs& ck, const std::string& manifest,
              const std::string& split) {
  json cfg_root = read_config(args.config);
  std::vector<TrainPair> pairs = load_pairs(manifest, split);
  if (pairs.empty())
    throw std::runtime_error("manifest: no pairs in split '" + split + "' of " + manifest);
  check_pair_dimensions(pairs);

  ModelConfig mcfg = resolve_model(cfg_root, pairs.front().caption.frames.cols,
                                   static_cast<int>(pairs.front().image.size()), ck.vq);
  ParamStore params = ParamStore::load(ck.checkpoint);
  VqHandles vq = make_vq(ck.vq, ck.codebook1, ck.codebook2, ck.checkpoint);

  std::vector<int> ns = {1, 5, 10};
  RetrievalPair reports = evaluate_retrieval(pairs, params, mcfg, ns, vq.get());

  ensure_out_dir(args.out, args.force);
  fs::path out(args.out);
  write_resolved_config(out, json{{"command", "eval"},
                                  {"manifest", manifest},
                                  {"split", split},
                                  {"checkpoint", ck.checkpoint},
                                  {"vq", ck.vq},
                                  {"out", args.out},
                                  {"ns", ns},
                                  {"model", model_to_json(mcfg, ck.vq)}});

  std::vector<std::vector<std::string>> rows;
  for (const RetrievalReport* r : {&reports.caption_to_image, &reports.image_to_caption}) {
    rows.push_back({r->direction, format_double(r->recall_at.at(1)),
                    format_double(r->recall_at.at(5)), format_double(r->recall_at.at(10)),
                    format_double(r->median_rank)});
  }
  write_delimited(out / "retrieval.csv", ',',
                  {"direction", "r_at_1", "r_at_5", "r_at_10", "median_rank"}, rows);
}

void cmd_recognize(const CommonArgs& args, const CheckpointArgs& ck, const std::string& corpus,
                   const std::string& split, int random_models) {
  json cfg_root = read_config(args.config);
  ExperimentInputs in = load_experiment_inputs(corpus, split, false);
  ModelConfig mcfg = resolve_model(cfg_root, in.tokens.front().features.frames.cols,
                                   static_cast<int>(in.images.vectors.front().size()), ck.vq);
  ParamStore params = ParamStore::load(ck.checkpoint);
  VqHandles vq = make_vq(ck.vq, ck.codebook1, ck.codebook2, ck.checkpoint);

  RecognitionRun run = run_word_recognition(params, mcfg, vq.get(), args.seed, ck.vq, in.tokens,
                                            in.targets, in.images, in.annotations, in.dict,
                                            in.counts);

  ensure_out_dir(args.out, args.force);
  fs::path out(args.out);
  write_resolved_config(out, json{{"command", "recognize"},
                                  {"corpus", corpus},
                                  {"split", split},
                                  {"checkpoint", ck.checkpoint},
                                  {"vq", ck.vq},
                                  {"seed", args.seed},
                                  {"random_models", random_models},
                                  {"out", args.out},
                                  {"model", model_to_json(mcfg, ck.vq)}});
  write_trials_csv(out / "trials.csv", run.trials);
  write_skipped(out, run.skipped);
  if (run.trials.empty())
    throw std::runtime_error("recognize: no eligible words were scored; see " +
                             (out / "skipped.txt").string());

  std::vector<std::vector<std::string>> summary;
  summary.push_back({"overall", format_double(mean_hits(run.trials))});
  for (const auto& [morph, mean] : mean_hits_by_morphology(run.trials))
    summary.push_back({"morphology:" + morph, format_double(mean)});
  write_delimited(out / "summary.csv", ',', {"scope", "mean_hits"}, summary);

  std::set<std::string> classes;
  for (const TargetWord& t : in.targets) classes.insert(t.word_class);
  std::vector<std::vector<std::string>> naive_rows;
  for (const std::string& word_class : classes) {
    NaiveBaseline nb = naive_baseline(in.images.ids, in.annotations, in.targets, word_class);
    write_lines(out / ("naive_set_" + word_class + ".txt"), nb.fixed_set);
    for (const auto& [word, hits] : nb.hits_per_word)
      naive_rows.push_back({word, word_class, std::to_string(hits)});
  }
  write_delimited(out / "naive_baseline.csv", ',', {"word", "word_class", "hits"}, naive_rows);

  if (random_models > 0) {
    std::map<std::string, double> base = random_baseline(random_models, args.seed, mcfg,
                                                         in.tokens, in.targets, in.images,
                                                         in.annotations);
    std::vector<std::vector<std::string>> rows;
    for (const auto& [word, mean] : base) rows.push_back({word, format_double(mean)});
    write_delimited(out / "random_baseline.csv", ',', {"word", "mean_hits"}, rows);
  }
}

void cmd_gate(const CommonArgs& args, const CheckpointArgs& ck, const std::string& corpus,
              const std::string& split) {
  json cfg_root = read_config(args.config);
  ExperimentInputs in = load_experiment_inputs(corpus, split, true);
  ModelConfig mcfg = resolve_model(cfg_root, in.tokens.front().features.frames.cols,
                                   static_cast<int>(in.images.vectors.front().size()), ck.vq);
  ParamStore params = ParamStore::load(ck.checkpoint);
  VqHandles vq = make_vq(ck.vq, ck.codebook1, ck.codebook2, ck.checkpoint);

  RecognitionRun run = run_gating(params, mcfg, vq.get(), args.seed, ck.vq, in.tokens, in.targets,
                                  in.images, in.annotations, in.alignments, in.dict, in.counts);

  ensure_out_dir(args.out, args.force);
  fs::path out(args.out);
  write_resolved_config(out, json{{"command", "gate"},
                                  {"corpus", corpus},
                                  {"split", split},
                                  {"checkpoint", ck.checkpoint},
                                  {"vq", ck.vq},
                                  {"seed", args.seed},
                                  {"out", args.out},
                                  {"model", model_to_json(mcfg, ck.vq)}});
  write_trials_csv(out / "trials.csv", run.trials);
  write_skipped(out, run.skipped);
  if (run.trials.empty())
    throw std::runtime_error("gate: no eligible words were scored; see " +
                             (out / "skipped.txt").string());

  // Plot data: mean hits per gate, one block per word length, ready for a
  // plotting tool that reads whitespace-separated columns.
  std::ostringstream plot;
  plot << "# word_length gate mean_hits n_trials\n";
  int current_length = -1;
  for (const GatingCurvePoint& p : gating_curve(run.trials)) {
    if (current_length >= 0 && p.word_length != current_length) plot << '\n';
    current_length = p.word_length;
    plot << p.word_length << ' ' << p.gate << ' ' << format_double(p.mean_hits) << ' '
         << p.n_trials << '\n';
  }
  write_text_file(out / "gating_curve.dat", plot.str());
}

void cmd_plurality(const CommonArgs& args, const CheckpointArgs& ck, const std::string& corpus,
                   const std::string& split, bool penultimate) {
  json cfg_root = read_config(args.config);
  ExperimentInputs in = load_experiment_inputs(corpus, split, penultimate);
  ModelConfig mcfg = resolve_model(cfg_root, in.tokens.front().features.frames.cols,
                                   static_cast<int>(in.images.vectors.front().size()), ck.vq);
  ParamStore params = ParamStore::load(ck.checkpoint);
  VqHandles vq = make_vq(ck.vq, ck.codebook1, ck.codebook2, ck.checkpoint);

  PluralityTable table =
      plurality_confusion(params, mcfg, vq.get(), in.tokens, in.targets, in.images,
                          in.annotations, in.dict, penultimate,
                          penultimate ? &in.alignments : nullptr);

  ensure_out_dir(args.out, args.force);
  fs::path out(args.out);
  write_resolved_config(out, json{{"command", "plurality"},
                                  {"corpus", corpus},
                                  {"split", split},
                                  {"checkpoint", ck.checkpoint},
                                  {"vq", ck.vq},
                                  {"penultimate", penultimate},
                                  {"out", args.out},
                                  {"model", model_to_json(mcfg, ck.vq)}});

  write_delimited(out / "table.csv", ',', {"prompt", "single", "multiple"},
                  {{"singular", std::to_string(table.counts[0][0]),
                    std::to_string(table.counts[0][1])},
                   {"plural", std::to_string(table.counts[1][0]),
                    std::to_string(table.counts[1][1])}});
  write_skipped(out, table.skipped);

  auto chi_or_nan = [&](bool yates) -> std::string {
    try {
      return format_double(chi_square_2x2(table, yates));
    } catch (const std::exception&) {
      return "nan";  // degenerate margins carry no test statistic
    }
  };
  write_delimited(out / "chi_square.csv", ',', {"correction", "value"},
                  {{"none", chi_or_nan(false)}, {"yates", chi_or_nan(true)}});
}

void cmd_export(const CommonArgs& args, const std::vector<std::string>& trial_files) {
  std::vector<TrialRecord> trials;
  for (const std::string& file : trial_files) {
    std::vector<TrialRecord> part = read_trials_csv(file);
    trials.insert(trials.end(), part.begin(), part.end());
  }
  GlmmTable table = export_glmm_table(trials);

  ensure_out_dir(args.out, args.force);
  fs::path out(args.out);
  write_resolved_config(out, json{{"command", "export"},
                                  {"trials", trial_files},
                                  {"out", args.out}});
  write_glmm_csv(out / "glmm.csv", table);
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"visually grounded speech model: corpus, training and evaluation runs"};
  app.require_subcommand(1);

  CommonArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus directory");
  add_common(synth, synth_args);
  synth->callback([&] { cmd_synth(synth_args); });

  CommonArgs train_args;
  std::string train_manifest, train_split = "train";
  int train_epochs = -1;
  bool train_vq = false;
  CLI::App* train = app.add_subcommand("train", "train the dual encoders on caption/image pairs");
  add_common(train, train_args);
  train->add_option("--manifest", train_manifest, "pair manifest")->required();
  train->add_option("--split", train_split, "manifest split to train on");
  train->add_option("--epochs", train_epochs, "override the configured epochs per phase");
  train->add_flag("--vq", train_vq, "add the warm-started quantized phase");
  train->callback(
      [&] { cmd_train(train_args, train_manifest, train_split, train_epochs, train_vq); });

  CommonArgs eval_args;
  CheckpointArgs eval_ck;
  std::string eval_manifest, eval_split = "test";
  CLI::App* eval = app.add_subcommand("eval", "retrieval metrics on a held-out split");
  add_common(eval, eval_args, /*with_seed=*/false);
  add_checkpoint(eval, eval_ck);
  eval->add_option("--manifest", eval_manifest, "pair manifest")->required();
  eval->add_option("--split", eval_split, "manifest split to evaluate");
  eval->callback([&] { cmd_eval(eval_args, eval_ck, eval_manifest, eval_split); });

  CommonArgs rec_args;
  CheckpointArgs rec_ck;
  std::string rec_corpus, rec_split = "test";
  int rec_random_models = 0;
  CLI::App* rec = app.add_subcommand("recognize", "isolated-word recognition trials");
  add_common(rec, rec_args);
  add_checkpoint(rec, rec_ck);
  rec->add_option("--corpus", rec_corpus, "corpus directory")->required();
  rec->add_option("--split", rec_split, "image split to rank against");
  rec->add_option("--random-models", rec_random_models,
                  "also score this many untrained models as a baseline");
  rec->callback(
      [&] { cmd_recognize(rec_args, rec_ck, rec_corpus, rec_split, rec_random_models); });

  CommonArgs gate_args;
  CheckpointArgs gate_ck;
  std::string gate_corpus, gate_split = "test";
  CLI::App* gate = app.add_subcommand("gate", "incremental phone-by-phone recognition trials");
  add_common(gate, gate_args);
  add_checkpoint(gate, gate_ck);
  gate->add_option("--corpus", gate_corpus, "corpus directory")->required();
  gate->add_option("--split", gate_split, "image split to rank against");
  gate->callback([&] { cmd_gate(gate_args, gate_ck, gate_corpus, gate_split); });

  CommonArgs plur_args;
  CheckpointArgs plur_ck;
  std::string plur_corpus, plur_split = "test";
  bool plur_penultimate = false;
  CLI::App* plur = app.add_subcommand("plurality", "singular/plural retrieval confusion table");
  add_common(plur, plur_args);
  add_checkpoint(plur, plur_ck);
  plur->add_option("--corpus", plur_corpus, "corpus directory")->required();
  plur->add_option("--split", plur_split, "image split to rank against");
  plur->add_flag("--penultimate", plur_penultimate,
                 "truncate every prompt at its second-to-last aligned phone");
  plur->callback(
      [&] { cmd_plurality(plur_args, plur_ck, plur_corpus, plur_split, plur_penultimate); });

  CommonArgs export_args;
  std::vector<std::string> export_trials;
  CLI::App* exp = app.add_subcommand("export", "merge trial files into a regression-ready table");
  add_common(exp, export_args, /*with_seed=*/false);
  exp->add_option("--trials", export_trials, "trial CSV files to merge")
      ->required()
      ->expected(-1);
  exp->callback([&] { cmd_export(export_args, export_trials); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace vgs
