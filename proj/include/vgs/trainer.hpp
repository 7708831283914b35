#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vgs/audio.hpp"
#include "vgs/model.hpp"
#include "vgs/param_store.hpp"
#include "vgs/vq.hpp"

namespace vgs {

struct TrainConfig {
  double margin = 0.2;
  double lr_min = 1e-6;
  double lr_max = 2e-4;
  int epochs = 16;  // per phase: the quantized phase trains this many again
  int batch_size = 16;
  int cycle_epochs = 4;  // learning-rate cycle period
  std::uint64_t seed = 0;
  bool vq_enabled = false;
  double vq_loss_weight = 0.25;

  // Accepts lr_min == lr_max and zero values so frozen runs (lr 0) and
  // evaluation-only runs (epochs 0) stay expressible.
  void validate() const;
};

struct TrainPair {
  FeatureSequence caption;
  std::vector<double> image;
};

// Sum over ordered pairs of distinct batch items of two hinge terms: for
// anchor pair i and other item j, max(0, margin + s(c_i, x_j) - s(c_i, x_i))
// with the mismatched image, and the same with the mismatched caption.
// Similarities are dot products; embeddings are expected unit-norm, making
// them cosines. Errors when the batch has fewer than two items.
Tensor batch_hinge_loss(const std::vector<Tensor>& caption_embs,
                        const std::vector<Tensor>& image_embs, double margin);

// Cosine-smoothed triangular schedule: lr(0) = lr_min, lr(cycle_len / 2) =
// lr_max, lr(cycle_len) = lr_min, periodic in `step`. Errors when cycle_len
// < 2.
double cyclic_lr(long long step, long long cycle_len, double lr_min, double lr_max);

// Classic bias-corrected Adam over a ParamStore's gradient buffers.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params, double lr);
  void reset();

 private:
  double beta1_;
  double beta2_;
  double eps_;
  long long t_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

struct TrainResult {
  ParamStore params;
  std::vector<double> epoch_loss;  // mean batch loss per epoch, phases concatenated
  bool vq_active = false;
  ParamStore phase1_params;  // pre-quantization parameters, kept when vq_active
  Codebook layer1;           // populated when vq_active
  Codebook layer2;
};

// Minimizes the batch hinge loss with Adam and the cyclic schedule, starting
// from `params`. Epoch order is reshuffled from the run seed; a trailing
// singleton batch is folded into its predecessor. With vq_enabled the run has
// two phases of cfg.epochs each: plain training, then a warm start that
// clones the parameters, seeds both codebooks from recurrent-layer
// activations, resets the optimizer state, and continues with quantization
// and EMA codebook updates active. A non-finite loss aborts with the epoch,
// batch, and utterance ids. Errors when the corpus has fewer than two pairs.
TrainResult train(const std::vector<TrainPair>& corpus, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, ParamStore params);

// Same, starting from fresh parameters drawn from the run seed.
TrainResult train(const std::vector<TrainPair>& corpus, const ModelConfig& mcfg,
                  const TrainConfig& tcfg);

struct RetrievalReport {
  std::string direction;
  std::map<int, double> recall_at;  // N -> percentage of queries with rank <= N
  double median_rank = 0.0;
};

struct RetrievalPair {
  RetrievalReport caption_to_image;
  RetrievalReport image_to_caption;
};

// Embeds every pair with recording disabled; row i of each matrix is item i.
struct EmbeddedSet {
  Matrix captions;
  Matrix images;
};
EmbeddedSet embed_pairs(const std::vector<TrainPair>& items, const ParamStore& params,
                        const ModelConfig& cfg, VqSession* vq = nullptr);

// Ranks every candidate row per query row by descending dot product, ties
// broken by lower row index; the correct candidate for query i is row i.
// R@N = percentage of queries whose correct row ranks at or above N; the
// median rank averages the two middle ranks for even query counts.
RetrievalReport rank_matrix(const Matrix& queries, const Matrix& candidates,
                            const std::vector<int>& ns, std::string direction);

// Both retrieval directions over a held-out set of matched pairs. Errors
// when the set is empty.
RetrievalPair evaluate_retrieval(const std::vector<TrainPair>& test_set,
                                 const ParamStore& params, const ModelConfig& cfg,
                                 const std::vector<int>& ns, VqSession* vq = nullptr);

}  // namespace vgs
