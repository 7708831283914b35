#include "vgs/model.hpp"

#include <cmath>
#include <stdexcept>

namespace vgs {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("model config: ") + name + " must be positive");
  };
  positive(feat_dim, "feat_dim");
  positive(image_feat_dim, "image_feat_dim");
  positive(conv_channels, "conv_channels");
  positive(conv_width, "conv_width");
  positive(conv_stride, "conv_stride");
  positive(lstm_layers, "lstm_layers");
  positive(lstm_hidden, "lstm_hidden");
  positive(attn_dim, "attn_dim");
  if (vq.enabled) {
    if (lstm_layers < 2)
      throw std::invalid_argument("model config: quantization needs at least two recurrent layers");
    if (vq.codes_layer1 < 2 || vq.codes_layer2 < 2)
      throw std::invalid_argument("model config: codebooks need at least two codes");
    if (!(vq.gamma > 0.0 && vq.gamma < 1.0))
      throw std::invalid_argument("model config: vq gamma must lie in (0, 1)");
    if (vq.loss_weight < 0.0)
      throw std::invalid_argument("model config: vq loss weight must be non-negative");
  }
}

namespace {

void fill_uniform(Tensor& t, int fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : *t.data) x = rng.uniform(-bound, bound);
}

std::string lstm_name(int layer, const char* dir, const char* part) {
  return "lstm" + std::to_string(layer) + "." + dir + "." + part;
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, "model_init"));
  ParamStore ps;
  int e = cfg.embed_dim();

  fill_uniform(ps.create("img.proj", {e, cfg.image_feat_dim}), cfg.image_feat_dim, rng);
  fill_uniform(ps.create("img.bias", {e}), cfg.image_feat_dim, rng);

  int conv_fan = cfg.feat_dim * cfg.conv_width;
  fill_uniform(ps.create("conv.kernel", {cfg.conv_channels, cfg.feat_dim, cfg.conv_width}), conv_fan, rng);
  fill_uniform(ps.create("conv.bias", {cfg.conv_channels}), conv_fan, rng);

  int h = cfg.lstm_hidden;
  for (int layer = 0; layer < cfg.lstm_layers; ++layer) {
    int in = layer == 0 ? cfg.conv_channels : 2 * h;
    for (const char* dir : {"fw", "bw"}) {
      fill_uniform(ps.create(lstm_name(layer, dir, "w_ih"), {4 * h, in}), in, rng);
      fill_uniform(ps.create(lstm_name(layer, dir, "w_hh"), {4 * h, h}), h, rng);
      Tensor& bias = ps.create(lstm_name(layer, dir, "bias"), {4 * h});
      fill_uniform(bias, in, rng);
      for (int i = h; i < 2 * h; ++i) (*bias.data)[static_cast<std::size_t>(i)] = 1.0;
    }
  }

  fill_uniform(ps.create("attn.w", {cfg.attn_dim, e}), e, rng);
  fill_uniform(ps.create("attn.w_bias", {cfg.attn_dim}), e, rng);
  fill_uniform(ps.create("attn.v", {e, cfg.attn_dim}), cfg.attn_dim, rng);
  fill_uniform(ps.create("attn.v_bias", {e}), cfg.attn_dim, rng);
  return ps;
}

Tensor encode_image(const std::vector<double>& image_feat, const ParamStore& params,
                    const ModelConfig& cfg) {
  if (static_cast<int>(image_feat.size()) != cfg.image_feat_dim)
    throw std::invalid_argument("encode_image: feature dim " + std::to_string(image_feat.size()) +
                                " does not match configured " + std::to_string(cfg.image_feat_dim));
  Tensor x = Tensor::from({cfg.image_feat_dim}, image_feat);
  return l2_normalize(affine(params.get("img.proj"), x, params.get("img.bias")));
}

Tensor attention_pool(const Tensor& h, const ParamStore& params, Matrix* weights_out) {
  Tensor scored = vgs::tanh(linear_rows(h, params.get("attn.w"), params.get("attn.w_bias")));
  Tensor gates = linear_rows(scored, params.get("attn.v"), params.get("attn.v_bias"));
  Tensor weights = softmax_over_axis(gates, 0);
  if (weights_out) {
    weights_out->rows = weights.dim(0);
    weights_out->cols = weights.dim(1);
    weights_out->v = weights.values();
  }
  return sum_over_axis(mul(weights, h), 0);
}

Tensor encode_caption(const Matrix& features, const ParamStore& params, const ModelConfig& cfg,
                      VqSession* vq, std::vector<Matrix>* layer_taps, Matrix* attn_weights_out) {
  if (features.cols != cfg.feat_dim)
    throw std::invalid_argument("encode_caption: feature dim " + std::to_string(features.cols) +
                                " does not match configured " + std::to_string(cfg.feat_dim));
  if (features.rows < 1)
    throw std::invalid_argument("encode_caption: empty feature sequence");
  if (layer_taps) layer_taps->clear();

  Tensor x = Tensor::from({features.rows, features.cols}, features.v);
  Tensor conv = conv1d(x, params.get("conv.kernel"), params.get("conv.bias"), cfg.conv_stride);
  int t = conv.dim(0);
  std::vector<Tensor> rows_in;
  rows_in.reserve(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) rows_in.push_back(row(conv, i));

  int hdim = cfg.lstm_hidden;
  for (int layer = 0; layer < cfg.lstm_layers; ++layer) {
    const Tensor& fw_wih = params.get(lstm_name(layer, "fw", "w_ih"));
    const Tensor& fw_whh = params.get(lstm_name(layer, "fw", "w_hh"));
    const Tensor& fw_b = params.get(lstm_name(layer, "fw", "bias"));
    const Tensor& bw_wih = params.get(lstm_name(layer, "bw", "w_ih"));
    const Tensor& bw_whh = params.get(lstm_name(layer, "bw", "w_hh"));
    const Tensor& bw_b = params.get(lstm_name(layer, "bw", "bias"));

    std::vector<Tensor> fw_h(static_cast<std::size_t>(t)), bw_h(static_cast<std::size_t>(t));
    Tensor h = Tensor::zeros({hdim});
    Tensor c = Tensor::zeros({hdim});
    for (int i = 0; i < t; ++i) {
      auto [nh, nc] = lstm_step(rows_in[static_cast<std::size_t>(i)], h, c, fw_wih, fw_whh, fw_b);
      h = nh;
      c = nc;
      fw_h[static_cast<std::size_t>(i)] = nh;
    }
    h = Tensor::zeros({hdim});
    c = Tensor::zeros({hdim});
    for (int i = t - 1; i >= 0; --i) {
      auto [nh, nc] = lstm_step(rows_in[static_cast<std::size_t>(i)], h, c, bw_wih, bw_whh, bw_b);
      h = nh;
      c = nc;
      bw_h[static_cast<std::size_t>(i)] = nh;
    }

    std::vector<Tensor> rows_out;
    rows_out.reserve(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i)
      rows_out.push_back(concat(fw_h[static_cast<std::size_t>(i)], bw_h[static_cast<std::size_t>(i)]));

    if (layer_taps) {
      Matrix tap(t, 2 * hdim);
      for (int i = 0; i < t; ++i) {
        const auto& vals = rows_out[static_cast<std::size_t>(i)].values();
        std::copy(vals.begin(), vals.end(), tap.row(i).begin());
      }
      layer_taps->push_back(std::move(tap));
    }

    if (vq && layer < 2 && vq->enabled(layer)) {
      for (int i = 0; i < t; ++i)
        rows_out[static_cast<std::size_t>(i)] = vq->apply(layer, rows_out[static_cast<std::size_t>(i)]);
    }
    rows_in = std::move(rows_out);
  }

  Tensor stacked = stack_rows(rows_in);
  Tensor pooled = attention_pool(stacked, params, attn_weights_out);
  return l2_normalize(pooled);
}

WarmStart warm_start_insert(const ParamStore& base, const ModelConfig& cfg,
                            const std::vector<Matrix>& warmup_captions, std::uint64_t seed) {
  if (!cfg.vq.enabled)
    throw std::invalid_argument("warm start: config does not enable quantization");
  if (warmup_captions.empty())
    throw std::invalid_argument("warm start: no warmup captions");

  std::vector<std::vector<double>> acts1, acts2;
  {
    NoGradGuard guard;
    std::vector<Matrix> taps;
    for (const Matrix& feats : warmup_captions) {
      encode_caption(feats, base, cfg, nullptr, &taps);
      for (int r = 0; r < taps[0].rows; ++r) {
        auto row0 = taps[0].row(r);
        acts1.emplace_back(row0.begin(), row0.end());
        auto row1 = taps[1].row(r);
        acts2.emplace_back(row1.begin(), row1.end());
      }
    }
  }

  Rng rng1(derive_seed(seed, "warm_start_layer1"));
  Rng rng2(derive_seed(seed, "warm_start_layer2"));
  WarmStart ws{base.clone(),
               codebook_from_activations(acts1, cfg.vq.codes_layer1, cfg.vq.gamma, rng1),
               codebook_from_activations(acts2, cfg.vq.codes_layer2, cfg.vq.gamma, rng2)};
  return ws;
}

}  // namespace vgs
