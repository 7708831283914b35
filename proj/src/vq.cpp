#include "vgs/vq.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "vgs/ops.hpp"

namespace vgs {

int nearest_code(const Codebook& cb, std::span<const double> x) {
  if (cb.n() == 0) throw std::invalid_argument("quantize: empty codebook");
  if (static_cast<int>(x.size()) != cb.dim())
    throw std::invalid_argument("quantize: input dim " + std::to_string(x.size()) +
                                " does not match codebook dim " + std::to_string(cb.dim()));
  int best = 0;
  double best_d = 0;
  for (int k = 0; k < cb.n(); ++k) {
    double d = 0;
    auto row = cb.codes.row(k);
    for (std::size_t j = 0; j < x.size(); ++j) {
      double diff = x[j] - row[j];
      d += diff * diff;
    }
    if (k == 0 || d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

QuantizeResult quantize(Codebook& cb, std::span<const double> x) {
  QuantizeResult r;
  r.index = nearest_code(cb, x);
  auto row = cb.codes.row(r.index);
  r.code.assign(row.begin(), row.end());
  cb.usage[static_cast<std::size_t>(r.index)] += 1;
  return r;
}

Tensor straight_through(const Tensor& x, std::vector<double> forward_values) {
  if (forward_values.size() != x.size())
    throw std::invalid_argument("straight_through: value count does not match input shape " +
                                shape_to_string(x.shape));
  return make_op(x.shape, std::move(forward_values), {x}, [&](Tensor& o) {
    auto og = o.grad;
    auto xg = x.grad;
    o.node->backward = [og, xg] {
      for (std::size_t i = 0; i < og->size(); ++i) (*xg)[i] += (*og)[i];
    };
  });
}

Tensor vq_loss(const std::vector<Tensor>& inputs, const Codebook& cb) {
  if (inputs.empty()) throw std::invalid_argument("vq_loss: no inputs");
  Tensor acc = Tensor::scalar(0.0);
  for (const Tensor& x : inputs) {
    if (x.rank() != 1 || x.dim(0) != cb.dim())
      throw std::invalid_argument("vq_loss: input shape " + shape_to_string(x.shape) +
                                  " does not match codebook dim " + std::to_string(cb.dim()));
    int k = nearest_code(cb, x.values());
    auto row = cb.codes.row(k);
    Tensor code = Tensor::from(x.shape, std::vector<double>(row.begin(), row.end()));
    Tensor diff = sub(x, code);
    acc = add(acc, sum_all(mul(diff, diff)));
  }
  double denom = static_cast<double>(inputs.size()) * cb.dim();
  return scale(acc, 1.0 / denom);
}

void ema_update(Codebook& cb, const std::vector<Assignment>& assignments) {
  std::map<int, std::pair<std::vector<double>, int>> grouped;
  for (const Assignment& a : assignments) {
    if (a.code < 0 || a.code >= cb.n())
      throw std::invalid_argument("ema_update: code index " + std::to_string(a.code) + " out of range");
    if (static_cast<int>(a.input.size()) != cb.dim())
      throw std::invalid_argument("ema_update: input dim does not match codebook");
    auto& slot = grouped[a.code];
    if (slot.first.empty()) slot.first.assign(static_cast<std::size_t>(cb.dim()), 0.0);
    for (int j = 0; j < cb.dim(); ++j) slot.first[static_cast<std::size_t>(j)] += a.input[static_cast<std::size_t>(j)];
    slot.second += 1;
  }
  for (const auto& [k, sum_count] : grouped) {
    auto row = cb.codes.row(k);
    for (int j = 0; j < cb.dim(); ++j) {
      double mean = sum_count.first[static_cast<std::size_t>(j)] / sum_count.second;
      row[static_cast<std::size_t>(j)] = cb.gamma * row[static_cast<std::size_t>(j)] + (1.0 - cb.gamma) * mean;
    }
  }
}

UsageStats usage_stats(const Codebook& cb) {
  std::uint64_t total = 0;
  for (std::uint64_t u : cb.usage) total += u;
  if (total == 0) throw std::runtime_error("usage_stats: no assignments recorded");
  UsageStats s;
  double entropy = 0;
  for (std::uint64_t u : cb.usage) {
    if (u == 0) continue;
    s.active += 1;
    double p = static_cast<double>(u) / static_cast<double>(total);
    entropy -= p * std::log(p);
  }
  s.perplexity = std::exp(entropy);
  s.collapsed = s.perplexity < 0.05 * cb.n();
  return s;
}

Codebook codebook_from_activations(const std::vector<std::vector<double>>& activations,
                                   int n_codes, double gamma, Rng& rng) {
  if (activations.empty()) throw std::invalid_argument("codebook init: no activations");
  if (n_codes < 1) throw std::invalid_argument("codebook init: need at least one code");
  std::size_t dim = activations[0].size();
  for (const auto& a : activations)
    if (a.size() != dim) throw std::invalid_argument("codebook init: inconsistent activation dims");

  Codebook cb(n_codes, static_cast<int>(dim), gamma);
  if (activations.size() >= static_cast<std::size_t>(n_codes)) {
    std::vector<std::size_t> idx(activations.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    for (int k = 0; k < n_codes; ++k) {
      auto row = cb.codes.row(k);
      const auto& src = activations[idx[static_cast<std::size_t>(k)]];
      std::copy(src.begin(), src.end(), row.begin());
    }
  } else {
    for (int k = 0; k < n_codes; ++k) {
      const auto& src = activations[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(activations.size()) - 1))];
      auto row = cb.codes.row(k);
      std::copy(src.begin(), src.end(), row.begin());
    }
  }
  return cb;
}

namespace {

constexpr char kCbMagic[8] = {'V', 'G', 'S', 'C', 'B', '0', '1', '\0'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("codebook: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double x) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("codebook: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void save_codebook(const std::filesystem::path& path, const Codebook& cb) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("codebook: cannot open for write: " + path.string());
  os.write(kCbMagic, sizeof(kCbMagic));
  put_u32(os, static_cast<std::uint32_t>(cb.n()));
  put_u32(os, static_cast<std::uint32_t>(cb.dim()));
  put_f64(os, cb.gamma);
  for (double x : cb.codes.v) put_f64(os, x);
  if (!os) throw std::runtime_error("codebook: write failed: " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("codebook: cannot open: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCbMagic, sizeof(kCbMagic)) != 0)
    throw std::runtime_error("codebook: bad magic in " + path.string());
  int n = static_cast<int>(get_u32(is));
  int dim = static_cast<int>(get_u32(is));
  double gamma = get_f64(is);
  Codebook cb(n, dim, gamma);
  for (double& x : cb.codes.v) x = get_f64(is);
  return cb;
}

VqSession::VqSession(Codebook* layer1, Codebook* layer2, VqMode mode) : mode_(mode) {
  cb_[0] = layer1;
  cb_[1] = layer2;
}

int VqSession::check_layer(int layer) {
  if (layer != 0 && layer != 1)
    throw std::invalid_argument("vq session: layer slot must be 0 or 1, got " + std::to_string(layer));
  return layer;
}

Tensor VqSession::apply(int layer, const Tensor& x) {
  Codebook* cb = cb_[check_layer(layer)];
  if (!cb) throw std::invalid_argument("vq session: layer " + std::to_string(layer) + " has no codebook");
  recs_[layer].push_back(x);
  if (mode_ == VqMode::identity_probe)
    return straight_through(x, *x.data);
  QuantizeResult qr = quantize(*cb, x.values());
  return straight_through(x, std::move(qr.code));
}

Tensor VqSession::loss() const {
  Tensor total = Tensor::scalar(0.0);
  bool any = false;
  for (int layer = 0; layer < 2; ++layer) {
    if (!cb_[layer] || recs_[layer].empty()) continue;
    total = add(total, vq_loss(recs_[layer], *cb_[layer]));
    any = true;
  }
  if (!any) throw std::runtime_error("vq session: loss() with nothing recorded");
  return total;
}

void VqSession::ema_update_all() {
  if (mode_ == VqMode::identity_probe)
    throw std::runtime_error("vq session: ema update is not available in identity_probe mode");
  for (int layer = 0; layer < 2; ++layer) {
    if (!cb_[layer] || recs_[layer].empty()) continue;
    std::vector<Assignment> assignments;
    assignments.reserve(recs_[layer].size());
    for (const Tensor& x : recs_[layer]) {
      Assignment a;
      a.code = nearest_code(*cb_[layer], x.values());
      a.input = *x.data;
      assignments.push_back(std::move(a));
    }
    ema_update(*cb_[layer], assignments);
  }
  clear();
}

void VqSession::clear() {
  recs_[0].clear();
  recs_[1].clear();
}

}  // namespace vgs
