#include "vgs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vgs/ops.hpp"

namespace vgs {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Chunks `order` into runs of batch_size; a trailing singleton joins its
// predecessor so every batch can form mismatched pairs.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   int batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  if (batches.size() >= 2 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

struct PhaseOutcome {
  std::vector<double> epoch_loss;
};

// One training phase: fixed parameter set, fresh optimizer, fresh schedule.
PhaseOutcome run_phase(const std::vector<TrainPair>& corpus, const ModelConfig& mcfg,
                       const TrainConfig& tcfg, ParamStore& params, VqSession* vq,
                       int phase) {
  std::vector<std::size_t> indices(corpus.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});

  long long batches_per_epoch =
      static_cast<long long>(make_batches(indices, tcfg.batch_size).size());
  long long cycle_len = std::max<long long>(2, batches_per_epoch * tcfg.cycle_epochs);

  Adam adam;
  long long step = 0;
  PhaseOutcome out;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::ostringstream tag;
    tag << "shuffle:p" << phase << ":e" << epoch;
    Rng rng(derive_seed(tcfg.seed, tag.str()));
    rng.shuffle(indices);
    std::vector<std::vector<std::size_t>> batches = make_batches(indices, tcfg.batch_size);

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      double lr = cyclic_lr(step, cycle_len, tcfg.lr_min, tcfg.lr_max);
      if (vq != nullptr) vq->clear();

      std::vector<Tensor> caps;
      std::vector<Tensor> imgs;
      caps.reserve(batches[b].size());
      imgs.reserve(batches[b].size());
      for (std::size_t idx : batches[b]) {
        caps.push_back(encode_caption(corpus[idx].caption.frames, params, mcfg, vq));
        imgs.push_back(encode_image(corpus[idx].image, params, mcfg));
      }

      Tensor loss = batch_hinge_loss(caps, imgs, tcfg.margin);
      if (vq != nullptr) loss = add(loss, scale(vq->loss(), tcfg.vq_loss_weight));

      double lv = loss.value();
      if (!std::isfinite(lv)) {
        std::ostringstream msg;
        msg << "train: non-finite loss " << lv << " at phase " << phase << " epoch " << epoch
            << " batch " << b << " covering utterances [";
        for (std::size_t k = 0; k < batches[b].size(); ++k) {
          if (k > 0) msg << ", ";
          msg << corpus[batches[b][k]].caption.utterance_id;
        }
        msg << "]";
        throw std::runtime_error(msg.str());
      }

      params.zero_grads();
      backward(loss);
      adam.step(params, lr);
      if (vq != nullptr) vq->ema_update_all();

      loss_sum += lv;
      ++step;
    }
    out.epoch_loss.push_back(loss_sum / static_cast<double>(batches.size()));
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw std::invalid_argument("TrainConfig: margin must be positive");
  if (lr_min < 0.0 || lr_max < lr_min)
    throw std::invalid_argument("TrainConfig: need 0 <= lr_min <= lr_max");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be non-negative");
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be at least 2");
  if (cycle_epochs < 1) throw std::invalid_argument("TrainConfig: cycle_epochs must be positive");
  if (vq_loss_weight < 0.0)
    throw std::invalid_argument("TrainConfig: vq_loss_weight must be non-negative");
}

Tensor batch_hinge_loss(const std::vector<Tensor>& caption_embs,
                        const std::vector<Tensor>& image_embs, double margin) {
  if (caption_embs.size() != image_embs.size())
    throw std::invalid_argument("batch_hinge_loss: caption and image counts differ");
  std::size_t n = caption_embs.size();
  if (n < 2) throw std::invalid_argument("batch_hinge_loss: batch needs at least two pairs");

  std::vector<std::vector<Tensor>> sim(n, std::vector<Tensor>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sim[i][j] = dot(caption_embs[i], image_embs[j]);

  Tensor loss = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      Tensor wrong_image = relu(add_scalar(sub(sim[i][j], sim[i][i]), margin));
      Tensor wrong_caption = relu(add_scalar(sub(sim[j][i], sim[i][i]), margin));
      loss = add(loss, add(wrong_image, wrong_caption));
    }
  }
  return loss;
}

double cyclic_lr(long long step, long long cycle_len, double lr_min, double lr_max) {
  if (cycle_len < 2) throw std::invalid_argument("cyclic_lr: cycle_len must be at least 2");
  long long phase = step % cycle_len;
  if (phase < 0) phase += cycle_len;
  double frac = static_cast<double>(phase) / static_cast<double>(cycle_len);
  return lr_min + (lr_max - lr_min) * (1.0 - std::cos(2.0 * kPi * frac)) / 2.0;
}

void Adam::step(ParamStore& params, double lr) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    std::vector<double>& m = m_[name];
    std::vector<double>& v = v_[name];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    const std::vector<double>& g = *p.grad;
    std::vector<double>& w = *p.data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

TrainResult train(const std::vector<TrainPair>& corpus, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, ParamStore params) {
  mcfg.validate();
  tcfg.validate();
  if (corpus.size() < 2) throw std::invalid_argument("train: corpus needs at least two pairs");

  TrainResult result;
  PhaseOutcome plain = run_phase(corpus, mcfg, tcfg, params, nullptr, 0);
  result.epoch_loss = plain.epoch_loss;

  if (tcfg.vq_enabled) {
    // Seed both codebooks from the plain model's recurrent activations over a
    // capped sample of training captions.
    std::vector<std::size_t> indices(corpus.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    Rng sample_rng(derive_seed(tcfg.seed, "warmup-sample"));
    sample_rng.shuffle(indices);
    std::size_t take = std::min<std::size_t>(indices.size(), 64);
    std::vector<Matrix> warmup;
    warmup.reserve(take);
    for (std::size_t k = 0; k < take; ++k)
      warmup.push_back(corpus[indices[k]].caption.frames);

    WarmStart ws =
        warm_start_insert(params, mcfg, warmup, derive_seed(tcfg.seed, "codebooks"));
    result.layer1 = std::move(ws.layer1);
    result.layer2 = std::move(ws.layer2);
    result.vq_active = true;
    result.phase1_params = std::move(params);

    ParamStore vq_params = std::move(ws.params);
    VqSession session(&result.layer1, &result.layer2, VqMode::active);
    PhaseOutcome quant = run_phase(corpus, mcfg, tcfg, vq_params, &session, 1);
    result.epoch_loss.insert(result.epoch_loss.end(), quant.epoch_loss.begin(),
                             quant.epoch_loss.end());
    result.params = std::move(vq_params);
  } else {
    result.params = std::move(params);
  }
  return result;
}

TrainResult train(const std::vector<TrainPair>& corpus, const ModelConfig& mcfg,
                  const TrainConfig& tcfg) {
  return train(corpus, mcfg, tcfg, init_params(mcfg, derive_seed(tcfg.seed, "init")));
}

EmbeddedSet embed_pairs(const std::vector<TrainPair>& items, const ParamStore& params,
                        const ModelConfig& cfg, VqSession* vq) {
  NoGradGuard guard;
  EmbeddedSet set;
  set.captions = Matrix(static_cast<int>(items.size()), cfg.embed_dim());
  set.images = Matrix(static_cast<int>(items.size()), cfg.embed_dim());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (vq != nullptr) vq->clear();
    Tensor c = encode_caption(items[i].caption.frames, params, cfg, vq);
    Tensor g = encode_image(items[i].image, params, cfg);
    std::copy(c.values().begin(), c.values().end(), set.captions.row(static_cast<int>(i)).begin());
    std::copy(g.values().begin(), g.values().end(), set.images.row(static_cast<int>(i)).begin());
  }
  if (vq != nullptr) vq->clear();
  return set;
}

RetrievalReport rank_matrix(const Matrix& queries, const Matrix& candidates,
                            const std::vector<int>& ns, std::string direction) {
  if (queries.rows != candidates.rows || queries.cols != candidates.cols)
    throw std::invalid_argument("rank_matrix: query and candidate matrices must match in shape");
  if (queries.rows == 0) throw std::invalid_argument("rank_matrix: empty query set");

  int q_count = queries.rows;
  std::vector<int> ranks(static_cast<std::size_t>(q_count), 0);
  parallel_for(static_cast<std::size_t>(q_count), [&](std::size_t qi) {
    int q = static_cast<int>(qi);
    std::span<const double> qv = queries.row(q);
    std::vector<double> sims(static_cast<std::size_t>(candidates.rows), 0.0);
    for (int c = 0; c < candidates.rows; ++c) {
      std::span<const double> cv = candidates.row(c);
      double s = 0.0;
      for (int d = 0; d < candidates.cols; ++d) s += qv[static_cast<std::size_t>(d)] * cv[static_cast<std::size_t>(d)];
      sims[static_cast<std::size_t>(c)] = s;
    }
    double correct = sims[static_cast<std::size_t>(q)];
    int rank = 1;
    for (int c = 0; c < candidates.rows; ++c) {
      if (c == q) continue;
      double s = sims[static_cast<std::size_t>(c)];
      if (s > correct || (s == correct && c < q)) ++rank;
    }
    ranks[qi] = rank;
  });

  RetrievalReport report;
  report.direction = std::move(direction);
  for (int n : ns) {
    int hits = 0;
    for (int r : ranks)
      if (r <= n) ++hits;
    report.recall_at[n] = 100.0 * static_cast<double>(hits) / static_cast<double>(q_count);
  }
  std::sort(ranks.begin(), ranks.end());
  std::size_t mid = ranks.size() / 2;
  report.median_rank = (ranks.size() % 2 == 1)
                           ? static_cast<double>(ranks[mid])
                           : (static_cast<double>(ranks[mid - 1]) + static_cast<double>(ranks[mid])) / 2.0;
  return report;
}

RetrievalPair evaluate_retrieval(const std::vector<TrainPair>& test_set,
                                 const ParamStore& params, const ModelConfig& cfg,
                                 const std::vector<int>& ns, VqSession* vq) {
  if (test_set.empty()) throw std::invalid_argument("evaluate_retrieval: empty test set");
  EmbeddedSet set = embed_pairs(test_set, params, cfg, vq);
  RetrievalPair pair;
  pair.caption_to_image = rank_matrix(set.captions, set.images, ns, "caption_to_image");
  pair.image_to_caption = rank_matrix(set.images, set.captions, ns, "image_to_caption");
  return pair;
}

}  // namespace vgs
