#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "vgs/common.hpp"
#include "vgs/tensor.hpp"

namespace vgs {

struct Codebook {
  Matrix codes;  // one code per row
  double gamma = 0.99;
  std::vector<std::uint64_t> usage;  // assignments since the last reset

  Codebook() = default;
  Codebook(int n, int dim, double gamma = 0.99)
      : codes(n, dim), gamma(gamma), usage(static_cast<std::size_t>(n), 0) {}

  int n() const { return codes.rows; }
  int dim() const { return codes.cols; }
  void reset_usage() { std::fill(usage.begin(), usage.end(), 0); }
};

// Index of the Euclidean-nearest code; ties resolve to the lowest index.
int nearest_code(const Codebook& cb, std::span<const double> x);

struct QuantizeResult {
  int index = -1;
  std::vector<double> code;
};

// nearest_code plus a usage bump on the selected entry.
QuantizeResult quantize(Codebook& cb, std::span<const double> x);

// Output takes `forward_values`; backward copies the output gradient onto x
// unchanged.
Tensor straight_through(const Tensor& x, std::vector<double> forward_values);

// Mean over inputs and dimensions of squared distance to each input's
// nearest code. Codes enter as constants: the gradient reaches the inputs
// only.
Tensor vq_loss(const std::vector<Tensor>& inputs, const Codebook& cb);

struct Assignment {
  int code = -1;
  std::vector<double> input;
};

// e_k <- gamma * e_k + (1 - gamma) * mean(inputs assigned to k). Codes with
// no assignments stay put.
void ema_update(Codebook& cb, const std::vector<Assignment>& assignments);

struct UsageStats {
  double perplexity = 0.0;
  int active = 0;
  bool collapsed = false;  // perplexity under 5% of the codebook size
};

// Errors if no assignments were recorded since the last reset.
UsageStats usage_stats(const Codebook& cb);

Codebook codebook_from_activations(const std::vector<std::vector<double>>& activations,
                                   int n_codes, double gamma, Rng& rng);

void save_codebook(const std::filesystem::path& path, const Codebook& cb);
Codebook load_codebook(const std::filesystem::path& path);

// `identity_probe` keeps the pass-through node and its backward in the
// graph but forwards the raw input instead of the selected code, making the
// end-to-end function smooth so finite differences can audit every
// parameter. Training and evaluation always run `active`.
enum class VqMode { active, identity_probe };

// Per-forward recording of quantizer traffic for the loss term and the EMA
// update. Layer slots are 0 (after the first recurrent layer) and 1 (after
// the second).
class VqSession {
 public:
  VqSession(Codebook* layer1, Codebook* layer2, VqMode mode = VqMode::active);

  bool enabled(int layer) const { return cb_[check_layer(layer)] != nullptr; }
  Tensor apply(int layer, const Tensor& x);

  // Sum of the per-layer vq_loss terms over everything recorded.
  Tensor loss() const;

  // EMA update of both codebooks from the recorded activations, then clears
  // the records. Refused in identity_probe mode.
  void ema_update_all();

  void clear();

 private:
  static int check_layer(int layer);

  Codebook* cb_[2];
  VqMode mode_;
  std::vector<Tensor> recs_[2];
};

}  // namespace vgs
