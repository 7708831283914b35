#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "vgs/gradcheck.hpp"
#include "vgs/ops.hpp"
#include "vgs/trainer.hpp"

using namespace vgs;

namespace {

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.feat_dim = 5;
  cfg.image_feat_dim = 4;
  cfg.conv_channels = 3;
  cfg.conv_width = 3;
  cfg.conv_stride = 2;
  cfg.lstm_layers = 2;
  cfg.lstm_hidden = 3;  // embedding width 6
  cfg.attn_dim = 2;
  return cfg;
}

FeatureSequence random_caption(const std::string& id, int t, int dim, Rng& rng) {
  FeatureSequence seq;
  seq.utterance_id = id;
  seq.frames = Matrix(t, dim);
  for (double& x : seq.frames.v) x = rng.gaussian();
  return seq;
}

std::vector<TrainPair> random_corpus(std::size_t n, const ModelConfig& cfg, Rng& rng) {
  std::vector<TrainPair> corpus;
  for (std::size_t i = 0; i < n; ++i) {
    TrainPair p;
    p.caption = random_caption("utt" + std::to_string(i), 6 + static_cast<int>(i % 3),
                               cfg.feat_dim, rng);
    p.image.resize(static_cast<std::size_t>(cfg.image_feat_dim));
    for (double& x : p.image) x = rng.gaussian();
    corpus.push_back(std::move(p));
  }
  return corpus;
}

Tensor unit_embedding(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  int dim = static_cast<int>(v.size());
  return Tensor::from({dim}, std::move(v));
}

bool same_bits(const ParamStore& a, const ParamStore& b) {
  for (const auto& [name, t] : a) {
    const Tensor& o = b.get(name);
    if (t.size() != o.size()) return false;
    if (std::memcmp(t.values().data(), o.values().data(), t.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

// The ordered-pair convention written out as a plain double loop.
double hinge_oracle(const std::vector<std::vector<double>>& c,
                    const std::vector<std::vector<double>>& g, double margin) {
  auto dotv = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  };
  double loss = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i == j) continue;
      loss += std::max(0.0, margin + dotv(c[i], g[j]) - dotv(c[i], g[i]));
      loss += std::max(0.0, margin + dotv(c[j], g[i]) - dotv(c[i], g[i]));
    }
  }
  return loss;
}

}  // namespace

TEST_CASE("training configuration validation accepts frozen runs and rejects nonsense") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  cfg.lr_min = cfg.lr_max = 0.0;
  cfg.epochs = 0;
  CHECK_NOTHROW(cfg.validate());

  cfg = TrainConfig{};
  cfg.margin = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = TrainConfig{};
  cfg.lr_min = 1e-3;
  cfg.lr_max = 1e-4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = TrainConfig{};
  cfg.epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = TrainConfig{};
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = TrainConfig{};
  cfg.cycle_epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("a perfectly separated batch of two has zero loss") {
  std::vector<Tensor> caps = {unit_embedding({1, 0}), unit_embedding({-1, 0})};
  std::vector<Tensor> imgs = {unit_embedding({1, 0}), unit_embedding({-1, 0})};
  Tensor loss = batch_hinge_loss(caps, imgs, 0.2);
  CHECK(loss.value() == 0.0);
}

TEST_CASE("a batch of two identical embeddings costs four margins") {
  std::vector<Tensor> caps = {unit_embedding({1, 0}), unit_embedding({1, 0})};
  std::vector<Tensor> imgs = {unit_embedding({1, 0}), unit_embedding({1, 0})};
  Tensor loss = batch_hinge_loss(caps, imgs, 0.2);
  CHECK(loss.value() == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("a batch of three matches the brute-force pair enumeration") {
  Rng rng(11);
  std::vector<std::vector<double>> cv, gv;
  std::vector<Tensor> caps, imgs;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> a(4), b(4);
    for (double& x : a) x = rng.gaussian();
    for (double& x : b) x = rng.gaussian();
    Tensor ta = unit_embedding(a), tb = unit_embedding(b);
    cv.push_back(ta.values());
    gv.push_back(tb.values());
    caps.push_back(ta);
    imgs.push_back(tb);
  }
  double expect = hinge_oracle(cv, gv, 0.2);
  Tensor loss = batch_hinge_loss(caps, imgs, 0.2);
  CHECK(std::fabs(loss.value() - expect) < 1e-12);
  CHECK(loss.value() >= 0.0);

  // Permuting the batch leaves the loss unchanged.
  std::vector<Tensor> caps_p = {caps[2], caps[0], caps[1]};
  std::vector<Tensor> imgs_p = {imgs[2], imgs[0], imgs[1]};
  CHECK(std::fabs(batch_hinge_loss(caps_p, imgs_p, 0.2).value() - expect) < 1e-12);
}

TEST_CASE("degenerate batches are rejected") {
  std::vector<Tensor> one = {unit_embedding({1, 0})};
  CHECK_THROWS_AS(batch_hinge_loss(one, one, 0.2), std::invalid_argument);
  std::vector<Tensor> two = {unit_embedding({1, 0}), unit_embedding({0, 1})};
  CHECK_THROWS_AS(batch_hinge_loss(two, one, 0.2), std::invalid_argument);
}

TEST_CASE("the learning-rate cycle starts at the floor, peaks halfway and repeats") {
  CHECK(cyclic_lr(0, 8, 1e-6, 2e-4) == 1e-6);
  CHECK(cyclic_lr(4, 8, 1e-6, 2e-4) == doctest::Approx(2e-4).epsilon(1e-12));
  CHECK(cyclic_lr(8, 8, 1e-6, 2e-4) == cyclic_lr(0, 8, 1e-6, 2e-4));
  CHECK(cyclic_lr(13, 8, 1e-6, 2e-4) == cyclic_lr(5, 8, 1e-6, 2e-4));

  double prev = -1.0;
  for (long long s = 0; s <= 4; ++s) {
    double lr = cyclic_lr(s, 8, 1e-6, 2e-4);
    CHECK(lr >= prev);
    prev = lr;
  }
  CHECK_THROWS_AS(cyclic_lr(0, 1, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("training with a zero learning rate leaves every parameter bit-exact") {
  ModelConfig mcfg = micro_config();
  Rng rng(21);
  std::vector<TrainPair> corpus = random_corpus(3, mcfg, rng);
  ParamStore init = init_params(mcfg, 5);

  TrainConfig tcfg;
  tcfg.lr_min = tcfg.lr_max = 0.0;
  tcfg.epochs = 2;
  tcfg.batch_size = 2;
  tcfg.seed = 9;
  TrainResult res = train(corpus, mcfg, tcfg, init.clone());
  CHECK(same_bits(res.params, init));
  CHECK(res.epoch_loss.size() == 2);
}

TEST_CASE("zero epochs return the starting parameters untouched") {
  ModelConfig mcfg = micro_config();
  Rng rng(22);
  std::vector<TrainPair> corpus = random_corpus(2, mcfg, rng);
  ParamStore init = init_params(mcfg, 6);

  TrainConfig tcfg;
  tcfg.epochs = 0;
  tcfg.batch_size = 2;
  TrainResult res = train(corpus, mcfg, tcfg, init.clone());
  CHECK(same_bits(res.params, init));
  CHECK(res.epoch_loss.empty());
}

TEST_CASE("the loss trace is a deterministic function of the seed") {
  ModelConfig mcfg = micro_config();
  Rng rng(23);
  std::vector<TrainPair> corpus = random_corpus(4, mcfg, rng);

  TrainConfig tcfg;
  tcfg.epochs = 3;
  tcfg.batch_size = 2;
  tcfg.lr_min = 1e-4;
  tcfg.lr_max = 1e-2;
  tcfg.seed = 31;
  TrainResult a = train(corpus, mcfg, tcfg);
  TrainResult b = train(corpus, mcfg, tcfg);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(same_bits(a.params, b.params));

  tcfg.seed = 32;
  TrainResult c = train(corpus, mcfg, tcfg);
  CHECK(a.epoch_loss != c.epoch_loss);
}

TEST_CASE("an odd corpus folds the trailing singleton into the last batch") {
  ModelConfig mcfg = micro_config();
  Rng rng(24);
  std::vector<TrainPair> corpus = random_corpus(5, mcfg, rng);

  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.batch_size = 2;
  tcfg.seed = 1;
  // 5 items at batch size 2 leave a singleton; training must not reject it.
  CHECK_NOTHROW(train(corpus, mcfg, tcfg));
  CHECK_THROWS_AS(train({}, mcfg, tcfg), std::invalid_argument);
}

TEST_CASE("a separable two-pair corpus trains to negligible loss") {
  ModelConfig mcfg = micro_config();
  Rng rng(25);
  std::vector<TrainPair> corpus = random_corpus(2, mcfg, rng);

  TrainConfig tcfg;
  tcfg.epochs = 200;  // one batch per epoch: 200 optimizer steps
  tcfg.batch_size = 2;
  tcfg.lr_min = 1e-3;
  tcfg.lr_max = 5e-2;
  tcfg.seed = 77;
  TrainResult res = train(corpus, mcfg, tcfg);
  CHECK(res.epoch_loss.back() < 0.01);
}

TEST_CASE("the training loss gradient survives a finite-difference audit with and without quantization") {
  ModelConfig mcfg = micro_config();
  mcfg.vq.enabled = true;
  mcfg.vq.codes_layer1 = 4;
  mcfg.vq.codes_layer2 = 4;
  mcfg.vq.gamma = 0.9;
  ParamStore ps = init_params(mcfg, 41);
  Rng rng(26);
  std::vector<TrainPair> corpus = random_corpus(2, mcfg, rng);

  auto embed_batch = [&](VqSession* vq) {
    std::vector<Tensor> caps, imgs;
    for (const TrainPair& p : corpus) {
      caps.push_back(encode_caption(p.caption.frames, ps, mcfg, vq));
      imgs.push_back(encode_image(p.image, ps, mcfg));
    }
    return std::pair<std::vector<Tensor>, std::vector<Tensor>>{caps, imgs};
  };

  SUBCASE("plain") {
    auto loss_fn = [&]() {
      auto [caps, imgs] = embed_batch(nullptr);
      return batch_hinge_loss(caps, imgs, 0.2);
    };
    FdReport rep = finite_difference_check(loss_fn, ps, 1e-5, 1e-3);
    INFO(rep.worst_summary());
    CHECK(rep.pass());
  }

  SUBCASE("identity-probe quantization with the weighted codebook penalty") {
    WarmStart ws = warm_start_insert(
        ps, mcfg, {corpus[0].caption.frames, corpus[1].caption.frames}, 55);
    VqSession probe(&ws.layer1, &ws.layer2, VqMode::identity_probe);
    auto loss_fn = [&]() {
      probe.clear();
      auto [caps, imgs] = embed_batch(&probe);
      Tensor hinge = batch_hinge_loss(caps, imgs, 0.2);
      return add(hinge, scale(probe.loss(), 0.25));
    };
    FdReport rep = finite_difference_check(loss_fn, ps, 1e-5, 1e-3);
    INFO(rep.worst_summary());
    CHECK(rep.pass());
  }
}

TEST_CASE("the two-phase quantized run produces live codebooks and a concatenated trace") {
  ModelConfig mcfg = micro_config();
  mcfg.vq.enabled = true;
  mcfg.vq.codes_layer1 = 4;
  mcfg.vq.codes_layer2 = 4;
  mcfg.vq.gamma = 0.9;
  Rng rng(27);
  std::vector<TrainPair> corpus = random_corpus(4, mcfg, rng);

  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.batch_size = 2;
  tcfg.lr_min = 1e-4;
  tcfg.lr_max = 1e-2;
  tcfg.seed = 51;
  tcfg.vq_enabled = true;
  TrainResult res = train(corpus, mcfg, tcfg);
  CHECK(res.vq_active);
  CHECK(res.epoch_loss.size() == 4);  // two epochs per phase
  CHECK(res.layer1.n() == 4);
  CHECK(res.layer2.n() == 4);
  CHECK(res.layer1.dim() == mcfg.embed_dim());

  // The trained quantized model still evaluates cleanly.
  VqSession session(&res.layer1, &res.layer2);
  RetrievalPair rp = evaluate_retrieval(corpus, res.params, mcfg, {1, 2, 4}, &session);
  CHECK(rp.caption_to_image.recall_at.at(4) == 100.0);
  CHECK(rp.image_to_caption.recall_at.at(4) == 100.0);
}

TEST_CASE("retrieval gives perfect scores when captions equal their images") {
  Matrix m(4, 4);
  for (int i = 0; i < 4; ++i) m.at(i, i) = 1.0 + 0.1 * i;
  RetrievalReport rep = rank_matrix(m, m, {1, 5}, "caption_to_image");
  CHECK(rep.recall_at.at(1) == 100.0);
  CHECK(rep.recall_at.at(5) == 100.0);
  CHECK(rep.median_rank == 1.0);
}

TEST_CASE("a hand-built three-item similarity matrix ranks exactly") {
  // Candidates are the standard basis, so each query row spells out its
  // similarity to every candidate directly.
  Matrix cands(3, 3);
  cands.at(0, 0) = cands.at(1, 1) = cands.at(2, 2) = 1.0;
  Matrix queries(3, 3);
  double sims[3][3] = {{0.9, 0.8, 0.7}, {0.1, 0.95, 0.2}, {0.5, 0.5, 0.4}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) queries.at(i, j) = sims[i][j];

  RetrievalReport rep = rank_matrix(queries, cands, {1, 2, 3}, "x");
  // Ranks: query 0 -> 1, query 1 -> 1, query 2 -> 3.
  CHECK(rep.recall_at.at(1) == doctest::Approx(200.0 / 3.0));
  CHECK(rep.recall_at.at(2) == doctest::Approx(200.0 / 3.0));
  CHECK(rep.recall_at.at(3) == 100.0);
  CHECK(rep.median_rank == 1.0);
}

TEST_CASE("similarity ties break toward the lower candidate id") {
  Matrix cands(3, 3);
  cands.at(0, 0) = cands.at(1, 1) = cands.at(2, 2) = 1.0;
  Matrix queries(3, 3);
  // Every query is equidistant from all candidates.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) queries.at(i, j) = 0.5;

  RetrievalReport rep = rank_matrix(queries, cands, {1, 2, 3}, "x");
  // Query 0 wins its tie, query 1 sits behind candidate 0, query 2 behind both.
  CHECK(rep.recall_at.at(1) == doctest::Approx(100.0 / 3.0));
  CHECK(rep.recall_at.at(2) == doctest::Approx(200.0 / 3.0));
  CHECK(rep.recall_at.at(3) == 100.0);
  CHECK(rep.median_rank == 2.0);
}

TEST_CASE("ranks agree with an exhaustive sort oracle on noisy data") {
  Rng rng(28);
  int n = 20;
  Matrix cands(n, 6);
  Matrix queries(n, 6);
  for (double& x : cands.v) x = rng.gaussian();
  // Coarse values create deliberate ties.
  for (double& x : queries.v) x = std::round(rng.gaussian() * 2.0) / 2.0;

  std::vector<int> oracle_ranks;
  for (int q = 0; q < n; ++q) {
    std::vector<std::pair<double, int>> scored;
    for (int c = 0; c < n; ++c) {
      double s = 0.0;
      for (int d = 0; d < 6; ++d) s += queries.at(q, d) * cands.at(c, d);
      scored.push_back({s, c});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int pos = 0; pos < n; ++pos)
      if (scored[static_cast<std::size_t>(pos)].second == q) oracle_ranks.push_back(pos + 1);
  }

  std::vector<int> ns = {1, 5, 10, n};
  RetrievalReport rep = rank_matrix(queries, cands, ns, "x");
  for (int k : ns) {
    int hits = 0;
    for (int r : oracle_ranks)
      if (r <= k) ++hits;
    CHECK(rep.recall_at.at(k) == doctest::Approx(100.0 * hits / n));
  }
  CHECK(rep.recall_at.at(n) == 100.0);

  double prev = 0.0;
  for (const auto& [k, pct] : rep.recall_at) {
    CHECK(pct >= prev);
    prev = pct;
  }
}

TEST_CASE("the median rank averages the middle pair for even query counts") {
  Matrix cands(2, 2);
  cands.at(0, 0) = 1.0;
  cands.at(1, 1) = 1.0;
  Matrix queries(2, 2);
  queries.at(0, 0) = 1.0;   // rank 1
  queries.at(1, 0) = 1.0;   // prefers the wrong candidate: rank 2
  queries.at(1, 1) = 0.5;
  RetrievalReport rep = rank_matrix(queries, cands, {1}, "x");
  CHECK(rep.median_rank == 1.5);
}

TEST_CASE("retrieval refuses an empty test set") {
  ModelConfig mcfg = micro_config();
  ParamStore ps = init_params(mcfg, 3);
  CHECK_THROWS_AS(evaluate_retrieval({}, ps, mcfg, {1}), std::invalid_argument);
}
