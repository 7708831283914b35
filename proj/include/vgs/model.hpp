#pragma once

#include <optional>

#include "vgs/common.hpp"
#include "vgs/ops.hpp"
#include "vgs/param_store.hpp"
#include "vgs/vq.hpp"

namespace vgs {

struct VqConfig {
  bool enabled = false;
  int codes_layer1 = 32;
  int codes_layer2 = 32;
  double gamma = 0.99;
  double loss_weight = 0.25;
};

struct ModelConfig {
  int feat_dim = 39;
  int image_feat_dim = 20;
  int conv_channels = 16;
  int conv_width = 6;
  int conv_stride = 2;
  int lstm_layers = 2;
  int lstm_hidden = 32;
  int attn_dim = 16;
  VqConfig vq;

  // Both encoders project into the caption encoder's bidirectional state
  // width.
  int embed_dim() const { return 2 * lstm_hidden; }

  void validate() const;
};

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor, except the
// forget-gate bias block which starts at one.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

Tensor encode_image(const std::vector<double>& image_feat, const ParamStore& params,
                    const ModelConfig& cfg);

// Per-channel softmax over time: weights[t][e] with each column summing to
// one; the pooled vector is the weighted sum of rows of h.
Tensor attention_pool(const Tensor& h, const ParamStore& params, Matrix* weights_out = nullptr);

// Conv front end, stacked bidirectional recurrent layers (quantized after
// layers one and two when a session is attached), attention pooling, unit
// normalization. `layer_taps`, when given, receives each recurrent layer's
// pre-quantization output rows.
Tensor encode_caption(const Matrix& features, const ParamStore& params, const ModelConfig& cfg,
                      VqSession* vq = nullptr, std::vector<Matrix>* layer_taps = nullptr,
                      Matrix* attn_weights_out = nullptr);

struct WarmStart {
  ParamStore params;
  Codebook layer1;
  Codebook layer2;
};

// Copies the trained parameters bit-exactly and initializes both codebooks
// from a uniform sample of the activations the quantizers will see, taken
// by running the plain encoder over the warmup captions.
WarmStart warm_start_insert(const ParamStore& base, const ModelConfig& cfg,
                            const std::vector<Matrix>& warmup_captions, std::uint64_t seed);

}  // namespace vgs
