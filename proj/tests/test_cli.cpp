#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vgs/cli.hpp"
#include "vgs/experiments.hpp"
#include "vgs/io.hpp"
#include "vgs/synth.hpp"
#include "vgs/trainer.hpp"

using namespace vgs;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = 0;
  std::string err;
};

// Runs the command line entry point in-process, capturing standard error.
CliResult run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("vgs");
  for (const std::string& a : args) argv.push_back(a.c_str());

  std::ostringstream captured;
  std::streambuf* old = std::cerr.rdbuf(captured.rdbuf());
  CliResult r;
  r.exit_code = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old);
  r.err = captured.str();
  return r;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

bool same_file_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

// Recursive byte comparison of two directory trees.
bool same_tree(const fs::path& a, const fs::path& b) {
  std::set<fs::path> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel_a.insert(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) rel_b.insert(fs::relative(e.path(), b));
  if (rel_a != rel_b) return false;
  for (const fs::path& rel : rel_a)
    if (!same_file_bytes(a / rel, b / rel)) return false;
  return true;
}

// Model dimensions matching fixture_config_json() below.
ModelConfig fixture_model(bool vq_enabled) {
  ModelConfig cfg;
  cfg.feat_dim = 7;
  cfg.image_feat_dim = 10;  // the corpus annotates one attribute per lemma
  cfg.conv_channels = 4;
  cfg.conv_width = 3;
  cfg.conv_stride = 2;
  cfg.lstm_layers = 2;
  cfg.lstm_hidden = 4;
  cfg.attn_dim = 3;
  cfg.vq.enabled = vq_enabled;
  cfg.vq.codes_layer1 = 8;
  cfg.vq.codes_layer2 = 8;
  return cfg;
}

TrainConfig fixture_train(std::uint64_t seed, bool vq) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.cycle_epochs = 2;
  cfg.lr_max = 0.002;
  cfg.seed = seed;
  cfg.vq_enabled = vq;
  return cfg;
}

std::string fixture_config_json() {
  return R"({
  "model": {"conv_channels": 4, "conv_width": 3, "conv_stride": 2,
            "lstm_layers": 2, "lstm_hidden": 4, "attn_dim": 3,
            "vq": {"codes_layer1": 8, "codes_layer2": 8}},
  "train": {"epochs": 2, "batch_size": 8, "cycle_epochs": 2, "lr_max": 0.002},
  "synth": {"vocab_size": 10, "n_images": 60, "frames_per_word": 10,
            "noise_level": 0.1, "feat_dim": 7}
}
)";
}

// One corpus plus one plain and one quantized training run, built once and
// shared read-only by every test case.
struct Fixture {
  fs::path root;
  fs::path config;
  fs::path corpus;
  fs::path run_plain;
  fs::path run_vq;
};

const Fixture& fixture() {
  static Fixture f = [] {
    Fixture fx;
    fx.root = fs::temp_directory_path() / "vgs_test_cli_fixture";
    fs::remove_all(fx.root);
    fs::create_directories(fx.root);
    fx.config = fx.root / "cfg.json";
    write_text_file(fx.config, fixture_config_json());
    fx.corpus = fx.root / "corpus";
    fx.run_plain = fx.root / "run_plain";
    fx.run_vq = fx.root / "run_vq";

    CliResult synth = run_cli({"synth", "--config", fx.config.string(), "--seed", "5", "--out",
                               fx.corpus.string()});
    REQUIRE(synth.exit_code == 0);

    std::string manifest = (fx.corpus / "manifest.tsv").string();
    CliResult plain = run_cli({"train", "--config", fx.config.string(), "--seed", "1",
                               "--manifest", manifest, "--out", fx.run_plain.string()});
    REQUIRE(plain.exit_code == 0);
    CliResult vq = run_cli({"train", "--config", fx.config.string(), "--seed", "1", "--vq",
                            "--manifest", manifest, "--out", fx.run_vq.string()});
    REQUIRE(vq.exit_code == 0);
    return fx;
  }();
  return f;
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fixture().root / name;
  fs::remove_all(p);
  return p;
}

std::string checkpoint() { return (fixture().run_plain / "checkpoint.bin").string(); }

std::map<std::string, std::vector<std::string>> csv_by_first_column(const fs::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& row : read_delimited(path, ',')) out[row.at(0)] = row;
  return out;
}

}  // namespace

TEST_CASE("synth writes a complete corpus directory") {
  const Fixture& fx = fixture();
  for (const char* name : {"manifest.tsv", "word_tokens.tsv", "annotations.tsv", "alignments.tsv",
                           "targets.tsv", "dictionary.txt", "lemma_map.tsv", "transcripts.txt",
                           "config.json"})
    CHECK(fs::exists(fx.corpus / name));
  CHECK(fs::is_directory(fx.corpus / "features"));
  CHECK(fs::is_directory(fx.corpus / "images"));

  auto manifest = parse_manifest(fx.corpus / "manifest.tsv");
  CHECK(manifest.size() == 108);  // 24 train images x 3 captions + 3 dev + 33 test
  std::map<std::string, int> by_split;
  for (const auto& e : manifest) ++by_split[e.split];
  CHECK(by_split["train"] == 72);
  CHECK(by_split["dev"] == 3);
  CHECK(by_split["test"] == 33);
}

TEST_CASE("a non-empty output directory is refused without --force") {
  const Fixture& fx = fixture();
  CliResult r = run_cli({"synth", "--config", fx.config.string(), "--seed", "5", "--out",
                         fx.corpus.string()});
  CHECK(r.exit_code != 0);
  CHECK(r.err.substr(0, 7) == "error: ");
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);  // single-line diagnostic
  CHECK(r.err.find("--force") != std::string::npos);
}

TEST_CASE("synth reruns are byte-identical") {
  const Fixture& fx = fixture();
  fs::path again = fresh_dir("corpus_again");

  // A fresh directory and a --force overwrite of it must both reproduce the
  // fixture corpus exactly; only the echoed output path in config.json may
  // differ, so compare against a run into the same directory name.
  REQUIRE(run_cli({"synth", "--config", fx.config.string(), "--seed", "5", "--out",
                   again.string()}).exit_code == 0);
  fs::path snapshot = fresh_dir("corpus_snapshot");
  fs::create_directories(snapshot);
  fs::copy(again, snapshot, fs::copy_options::recursive);
  REQUIRE(run_cli({"synth", "--config", fx.config.string(), "--seed", "5", "--force", "--out",
                   again.string()}).exit_code == 0);
  CHECK(same_tree(again, snapshot));

  // Everything except the echoed path also matches the fixture corpus.
  CHECK(same_file_bytes(again / "manifest.tsv", fx.corpus / "manifest.tsv"));
  CHECK(same_file_bytes(again / "dictionary.txt", fx.corpus / "dictionary.txt"));
  CHECK(same_file_bytes(again / "features" / fs::directory_iterator(again / "features")->path().filename(),
                        fx.corpus / "features" / fs::directory_iterator(again / "features")->path().filename()));
}

TEST_CASE("a different seed produces a different corpus") {
  const Fixture& fx = fixture();
  fs::path other = fresh_dir("corpus_seed9");
  REQUIRE(run_cli({"synth", "--config", fx.config.string(), "--seed", "9", "--out",
                   other.string()}).exit_code == 0);
  CHECK_FALSE(same_file_bytes(other / "dictionary.txt", fx.corpus / "dictionary.txt"));
}

TEST_CASE("train writes a checkpoint, a loss trace and the resolved config") {
  const Fixture& fx = fixture();
  CHECK(fs::exists(fx.run_plain / "checkpoint.bin"));
  CHECK(fs::exists(fx.run_plain / "config.json"));

  auto trace = read_delimited(fx.run_plain / "loss_trace.csv", ',');
  REQUIRE(trace.size() == 3);  // header + one row per epoch
  CHECK(trace[0] == std::vector<std::string>{"epoch", "phase", "mean_loss"});
  CHECK(trace[1][0] == "0");
  CHECK(trace[1][1] == "1");
  CHECK(trace[2][1] == "1");
  CHECK(std::stod(trace[1][2]) > 0.0);

  // The run reproduces the in-process trainer exactly.
  auto pairs = load_pairs(fx.corpus / "manifest.tsv", "train");
  TrainResult direct = train(pairs, fixture_model(false), fixture_train(1, false));
  fs::path probe = fixture().root / "probe_checkpoint.bin";
  direct.params.save(probe);
  CHECK(same_file_bytes(probe, fx.run_plain / "checkpoint.bin"));
  CHECK(format_double(direct.epoch_loss.at(0)) == trace[1][2]);
  CHECK(format_double(direct.epoch_loss.at(1)) == trace[2][2]);
}

TEST_CASE("train with --epochs 0 checkpoints the initial parameters") {
  const Fixture& fx = fixture();
  fs::path out = fresh_dir("run_zero");
  REQUIRE(run_cli({"train", "--config", fx.config.string(), "--seed", "1", "--epochs", "0",
                   "--manifest", (fx.corpus / "manifest.tsv").string(), "--out",
                   out.string()}).exit_code == 0);

  auto pairs = load_pairs(fx.corpus / "manifest.tsv", "train");
  TrainConfig tcfg = fixture_train(1, false);
  tcfg.epochs = 0;
  TrainResult direct = train(pairs, fixture_model(false), tcfg);
  fs::path probe = fixture().root / "probe_zero.bin";
  direct.params.save(probe);
  CHECK(same_file_bytes(probe, out / "checkpoint.bin"));

  auto trace = read_delimited(out / "loss_trace.csv", ',');
  CHECK(trace.size() == 1);  // header only
}

TEST_CASE("train reruns reproduce the loss trace byte for byte") {
  const Fixture& fx = fixture();
  fs::path out = fresh_dir("run_again");
  REQUIRE(run_cli({"train", "--config", fx.config.string(), "--seed", "1", "--manifest",
                   (fx.corpus / "manifest.tsv").string(), "--out", out.string()})
              .exit_code == 0);
  CHECK(same_file_bytes(out / "loss_trace.csv", fx.run_plain / "loss_trace.csv"));
  CHECK(same_file_bytes(out / "checkpoint.bin", fx.run_plain / "checkpoint.bin"));
}

TEST_CASE("train --vq adds the quantized phase and its artifacts") {
  const Fixture& fx = fixture();
  for (const char* name : {"checkpoint.bin", "checkpoint_phase1.bin", "codebook1.bin",
                           "codebook2.bin", "loss_trace.csv"})
    CHECK(fs::exists(fx.run_vq / name));

  // Phase one is the plain run: same seed, same data, identical parameters.
  CHECK(same_file_bytes(fx.run_vq / "checkpoint_phase1.bin", fx.run_plain / "checkpoint.bin"));
  CHECK_FALSE(same_file_bytes(fx.run_vq / "checkpoint.bin", fx.run_plain / "checkpoint.bin"));

  auto trace = read_delimited(fx.run_vq / "loss_trace.csv", ',');
  REQUIRE(trace.size() == 5);  // header + two epochs per phase
  CHECK(trace[1][1] == "1");
  CHECK(trace[2][1] == "1");
  CHECK(trace[3][1] == "2");
  CHECK(trace[4][1] == "2");
  // The plain phase of the quantized run matches the plain run's trace.
  auto plain_trace = read_delimited(fx.run_plain / "loss_trace.csv", ',');
  CHECK(trace[1] == plain_trace[1]);
  CHECK(trace[2] == plain_trace[2]);

  Codebook cb1 = load_codebook(fx.run_vq / "codebook1.bin");
  Codebook cb2 = load_codebook(fx.run_vq / "codebook2.bin");
  CHECK(cb1.n() == 8);
  CHECK(cb2.n() == 8);
  CHECK(cb1.dim() == 8);  // bidirectional recurrent taps: twice the hidden size
  CHECK(cb2.dim() == 8);
}

TEST_CASE("eval reports both retrieval directions and matches the library") {
  const Fixture& fx = fixture();
  fs::path out = fresh_dir("eval_plain");
  REQUIRE(run_cli({"eval", "--config", fx.config.string(), "--checkpoint", checkpoint(),
                   "--manifest", (fx.corpus / "manifest.tsv").string(), "--split", "test",
                   "--out", out.string()}).exit_code == 0);

  auto rows = csv_by_first_column(out / "retrieval.csv");
  REQUIRE(rows.count("caption_to_image") == 1);
  REQUIRE(rows.count("image_to_caption") == 1);

  auto pairs = load_pairs(fx.corpus / "manifest.tsv", "test");
  ParamStore params = ParamStore::load(checkpoint());
  RetrievalPair direct =
      evaluate_retrieval(pairs, params, fixture_model(false), {1, 5, 10}, nullptr);
  const auto& c2i = rows["caption_to_image"];
  CHECK(c2i.at(1) == format_double(direct.caption_to_image.recall_at.at(1)));
  CHECK(c2i.at(2) == format_double(direct.caption_to_image.recall_at.at(5)));
  CHECK(c2i.at(3) == format_double(direct.caption_to_image.recall_at.at(10)));
  CHECK(c2i.at(4) == format_double(direct.caption_to_image.median_rank));
  const auto& i2c = rows["image_to_caption"];
  CHECK(i2c.at(3) == format_double(direct.image_to_caption.recall_at.at(10)));

  for (const auto& row : {c2i, i2c})
    for (int col : {1, 2, 3}) {
      double v = std::stod(row.at(col));
      CHECK(v >= 0.0);
      CHECK(v <= 100.0);
    }
  CHECK(std::stod(c2i.at(1)) <= std::stod(c2i.at(2)));
  CHECK(std::stod(c2i.at(2)) <= std::stod(c2i.at(3)));
}

TEST_CASE("eval --vq loads the codebooks saved next to the checkpoint") {
  const Fixture& fx = fixture();
  fs::path out = fresh_dir("eval_vq");
  REQUIRE(run_cli({"eval", "--config", fx.config.string(), "--checkpoint",
                   (fx.run_vq / "checkpoint.bin").string(), "--vq", "--manifest",
                   (fx.corpus / "manifest.tsv").string(), "--split", "test", "--out",
                   out.string()}).exit_code == 0);

  auto pairs = load_pairs(fx.corpus / "manifest.tsv", "test");
  ParamStore params = ParamStore::load(fx.run_vq / "checkpoint.bin");
  Codebook cb1 = load_codebook(fx.run_vq / "codebook1.bin");
  Codebook cb2 = load_codebook(fx.run_vq / "codebook2.bin");
  VqSession session(&cb1, &cb2, VqMode::active);
  RetrievalPair direct =
      evaluate_retrieval(pairs, params, fixture_model(true), {1, 5, 10}, &session);

  auto rows = csv_by_first_column(out / "retrieval.csv");
  CHECK(rows["caption_to_image"].at(3) ==
        format_double(direct.caption_to_image.recall_at.at(10)));
  CHECK(rows["image_to_caption"].at(4) == format_double(direct.image_to_caption.median_rank));
}

TEST_CASE("eval on a split with no pairs fails with a single-line error") {
  const Fixture& fx = fixture();
  CliResult r = run_cli({"eval", "--config", fx.config.string(), "--checkpoint", checkpoint(),
                         "--manifest", (fx.corpus / "manifest.tsv").string(), "--split", "bogus",
                         "--out", fresh_dir("eval_bogus").string()});
  CHECK(r.exit_code != 0);
  CHECK(r.err.substr(0, 7) == "error: ");
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("recognize writes trials that match the library run") {
  const Fixture& fx = fixture();
  fs::path out = fresh_dir("rec");
  REQUIRE(run_cli({"recognize", "--config", fx.config.string(), "--checkpoint", checkpoint(),
                   "--corpus", fx.corpus.string(), "--split", "test", "--seed", "1",
                   "--random-models", "2", "--out", out.string()}).exit_code == 0);
  for (const char* name : {"trials.csv", "skipped.txt", "summary.csv", "naive_baseline.csv",
                           "random_baseline.csv", "config.json"})
    CHECK(fs::exists(out / name));

  auto tokens = load_word_tokens(fx.corpus);
  std::istringstream targets_s(read_text_file(fx.corpus / "targets.tsv"));
  auto targets = parse_target_words(targets_s);
  std::istringstream ann_s(read_text_file(fx.corpus / "annotations.tsv"));
  AnnotationSet ann = parse_annotations(ann_s);
  std::istringstream dict_s(read_text_file(fx.corpus / "dictionary.txt"));
  PronDict dict = parse_dictionary(dict_s);
  std::istringstream lm_s(read_text_file(fx.corpus / "lemma_map.tsv"));
  std::istringstream tr_s(read_text_file(fx.corpus / "transcripts.txt"));
  TranscriptCounts counts = count_transcripts(tr_s, parse_lemma_map(lm_s));
  ImageFeatures images = load_split_images(fx.corpus, "test");
  ParamStore params = ParamStore::load(checkpoint());

  RecognitionRun direct = run_word_recognition(params, fixture_model(false), nullptr, 1, false,
                                               tokens, targets, images, ann, dict, counts);
  fs::path probe = fixture().root / "probe_trials.csv";
  write_trials_csv(probe, direct.trials);
  CHECK(same_file_bytes(probe, out / "trials.csv"));

  std::vector<TrialRecord> trials = read_trials_csv(out / "trials.csv");
  REQUIRE(!trials.empty());
  for (const TrialRecord& t : trials) {
    CHECK(t.gate == 0);
    CHECK(t.model_seed == 1);
    CHECK_FALSE(t.vq);
  }

  auto summary = csv_by_first_column(out / "summary.csv");
  REQUIRE(summary.count("overall") == 1);
  CHECK(summary["overall"].at(1) == format_double(mean_hits(trials)));

  // Two untrained models per word, deterministic in the seed.
  auto baseline_rows = read_delimited(out / "random_baseline.csv", ',');
  REQUIRE(baseline_rows.size() > 1);
  auto direct_baseline = random_baseline(2, 1, fixture_model(false), tokens, targets, images, ann);
  CHECK(baseline_rows.size() == direct_baseline.size() + 1);
  for (std::size_t i = 1; i < baseline_rows.size(); ++i) {
    const auto& row = baseline_rows[i];
    CHECK(format_double(direct_baseline.at(row.at(0))) == row.at(1));
  }
}

TEST_CASE("recognize skips ineligible words with a note") {
  fs::path out = fixture().root / "rec";  // written by the previous case
  REQUIRE(fs::exists(out / "skipped.txt"));
  std::string skipped = slurp(out / "skipped.txt");
  CHECK(skipped.find("positive images") != std::string::npos);
}

TEST_CASE("gate produces one trial per aligned phone and plot-ready means") {
  const Fixture& fx = fixture();
  fs::path out = fresh_dir("gate");
  REQUIRE(run_cli({"gate", "--config", fx.config.string(), "--checkpoint", checkpoint(),
                   "--corpus", fx.corpus.string(), "--split", "test", "--seed", "1", "--out",
                   out.string()}).exit_code == 0);

  std::vector<TrialRecord> trials = read_trials_csv(out / "trials.csv");
  REQUIRE(!trials.empty());

  std::istringstream dict_s(read_text_file(fx.corpus / "dictionary.txt"));
  PronDict dict = parse_dictionary(dict_s);

  // Every presented (word, speaker) contributes gates 1..phone count.
  std::map<std::pair<std::string, std::string>, std::set<int>> gates;
  for (const TrialRecord& t : trials) {
    CHECK(t.gate >= 1);
    gates[{t.word, t.speaker}].insert(t.gate);
  }
  for (const auto& [key, seen] : gates) {
    int phones = static_cast<int>(dict.phones(key.first).size());
    CHECK(static_cast<int>(seen.size()) == phones);
    CHECK(*seen.begin() == 1);
    CHECK(*seen.rbegin() == phones);
  }

  std::string plot = slurp(out / "gating_curve.dat");
  CHECK(plot.substr(0, 1) == "#");
  CHECK(plot.find("\n\n") != std::string::npos);  // one block per word length

  // The plot data aggregates exactly the written trials.
  std::vector<GatingCurvePoint> curve = gating_curve(trials);
  std::ostringstream expected;
  expected << "# word_length gate mean_hits n_trials\n";
  int current = -1;
  for (const GatingCurvePoint& p : curve) {
    if (current >= 0 && p.word_length != current) expected << '\n';
    current = p.word_length;
    expected << p.word_length << ' ' << p.gate << ' ' << format_double(p.mean_hits) << ' '
             << p.n_trials << '\n';
  }
  CHECK(plot == expected.str());
}

TEST_CASE("plurality writes the confusion table and both test statistics") {
  const Fixture& fx = fixture();
  fs::path out = fresh_dir("plur");
  // The full image set (empty split) has enough single- and multiple-referent
  // images for eligibility; the test split alone does not.
  REQUIRE(run_cli({"plurality", "--config", fx.config.string(), "--checkpoint", checkpoint(),
                   "--corpus", fx.corpus.string(), "--split", "", "--seed", "1", "--out",
                   out.string()}).exit_code == 0);

  auto table_rows = csv_by_first_column(out / "table.csv");
  REQUIRE(table_rows.count("singular") == 1);
  REQUIRE(table_rows.count("plural") == 1);

  auto tokens = load_word_tokens(fx.corpus);
  std::istringstream targets_s(read_text_file(fx.corpus / "targets.tsv"));
  auto targets = parse_target_words(targets_s);
  std::istringstream ann_s(read_text_file(fx.corpus / "annotations.tsv"));
  AnnotationSet ann = parse_annotations(ann_s);
  std::istringstream dict_s(read_text_file(fx.corpus / "dictionary.txt"));
  PronDict dict = parse_dictionary(dict_s);
  ImageFeatures images = load_split_images(fx.corpus, "");
  ParamStore params = ParamStore::load(checkpoint());
  PluralityTable direct = plurality_confusion(params, fixture_model(false), nullptr, tokens,
                                              targets, images, ann, dict);
  REQUIRE(direct.total() > 0);
  CHECK(table_rows["singular"].at(1) == std::to_string(direct.counts[0][0]));
  CHECK(table_rows["singular"].at(2) == std::to_string(direct.counts[0][1]));
  CHECK(table_rows["plural"].at(1) == std::to_string(direct.counts[1][0]));
  CHECK(table_rows["plural"].at(2) == std::to_string(direct.counts[1][1]));

  auto chi = csv_by_first_column(out / "chi_square.csv");
  REQUIRE(chi.count("none") == 1);
  REQUIRE(chi.count("yates") == 1);
  CHECK(chi["none"].at(1) == format_double(chi_square_2x2(direct)));
  CHECK(chi["yates"].at(1) == format_double(chi_square_2x2(direct, true)));
}

TEST_CASE("plurality --penultimate truncates prompts before their final phone") {
  const Fixture& fx = fixture();
  fs::path out = fresh_dir("plur_gate");
  REQUIRE(run_cli({"plurality", "--config", fx.config.string(), "--checkpoint", checkpoint(),
                   "--corpus", fx.corpus.string(), "--split", "", "--seed", "1",
                   "--penultimate", "--out", out.string()}).exit_code == 0);
  auto table_rows = csv_by_first_column(out / "table.csv");
  long long total = 0;
  for (const char* prompt : {"singular", "plural"})
    for (int col : {1, 2}) total += std::stoll(table_rows[prompt].at(col));
  CHECK(total > 0);
  // Irregular plurals cannot be truncated consistently and are noted.
  std::string skipped = slurp(out / "skipped.txt");
  CHECK(skipped.find("irregular") != std::string::npos);
}

TEST_CASE("export merges trial files into the regression table") {
  fs::path rec_trials = fixture().root / "rec" / "trials.csv";
  fs::path gate_trials = fixture().root / "gate" / "trials.csv";
  REQUIRE(fs::exists(rec_trials));
  REQUIRE(fs::exists(gate_trials));

  fs::path out = fresh_dir("export");
  REQUIRE(run_cli({"export", "--trials", rec_trials.string(), gate_trials.string(), "--out",
                   out.string()}).exit_code == 0);

  std::vector<TrialRecord> merged = read_trials_csv(rec_trials);
  std::vector<TrialRecord> gate_part = read_trials_csv(gate_trials);
  merged.insert(merged.end(), gate_part.begin(), gate_part.end());

  fs::path probe = fixture().root / "probe_glmm.csv";
  write_glmm_csv(probe, export_glmm_table(merged));
  CHECK(same_file_bytes(probe, out / "glmm.csv"));

  auto rows = read_delimited(out / "glmm.csv", ',');
  REQUIRE(rows.size() == merged.size() + 1);
  CHECK(rows[0].at(0) == "lemma");
  CHECK(rows[0].size() >= 31);
}

TEST_CASE("missing inputs fail with one diagnostic line and a nonzero code") {
  const Fixture& fx = fixture();
  CliResult missing_ckpt =
      run_cli({"eval", "--config", fx.config.string(), "--checkpoint",
               (fixture().root / "no_such.bin").string(), "--manifest",
               (fx.corpus / "manifest.tsv").string(), "--out", fresh_dir("err1").string()});
  CHECK(missing_ckpt.exit_code != 0);
  CHECK(missing_ckpt.err.substr(0, 7) == "error: ");
  CHECK(std::count(missing_ckpt.err.begin(), missing_ckpt.err.end(), '\n') == 1);

  CliResult missing_corpus =
      run_cli({"recognize", "--config", fx.config.string(), "--checkpoint", checkpoint(),
               "--corpus", (fixture().root / "no_corpus").string(), "--out",
               fresh_dir("err2").string()});
  CHECK(missing_corpus.exit_code != 0);
  CHECK(std::count(missing_corpus.err.begin(), missing_corpus.err.end(), '\n') == 1);

  CliResult missing_trials = run_cli(
      {"export", "--trials", (fixture().root / "no_trials.csv").string(), "--out",
       fresh_dir("err3").string()});
  CHECK(missing_trials.exit_code != 0);
}

TEST_CASE("an unknown configuration key is rejected") {
  const Fixture& fx = fixture();
  fs::path bad = fx.root / "bad_cfg.json";
  write_text_file(bad, R"({"model": {"conv_chanels": 4}})");
  CliResult r = run_cli({"train", "--config", bad.string(), "--manifest",
                         (fx.corpus / "manifest.tsv").string(), "--out",
                         fresh_dir("err4").string()});
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("conv_chanels") != std::string::npos);
}

TEST_CASE("a run's resolved config can seed an identical rerun") {
  const Fixture& fx = fixture();
  fs::path out = fresh_dir("run_from_resolved");
  REQUIRE(run_cli({"train", "--config", (fx.run_plain / "config.json").string(), "--seed", "1",
                   "--manifest", (fx.corpus / "manifest.tsv").string(), "--out",
                   out.string()}).exit_code == 0);
  CHECK(same_file_bytes(out / "checkpoint.bin", fx.run_plain / "checkpoint.bin"));
  CHECK(same_file_bytes(out / "loss_trace.csv", fx.run_plain / "loss_trace.csv"));
}

TEST_CASE("a feature dimension clash is reported before training") {
  const Fixture& fx = fixture();
  fs::path bad = fx.root / "clash_cfg.json";
  write_text_file(bad, R"({"model": {"feat_dim": 99, "conv_channels": 4, "conv_width": 3,
    "conv_stride": 2, "lstm_layers": 2, "lstm_hidden": 4, "attn_dim": 3}})");
  CliResult r = run_cli({"train", "--config", bad.string(), "--manifest",
                         (fx.corpus / "manifest.tsv").string(), "--out",
                         fresh_dir("err5").string()});
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("99") != std::string::npos);
}
