#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "vgs/tensor.hpp"

namespace vgs {

// Named trainable parameters. Iteration order is the lexicographic name
// order, which every consumer (initialization, optimizer, serialization)
// relies on for determinism.
class ParamStore {
 public:
  Tensor& create(const std::string& name, std::vector<int> shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grads();
  std::size_t total_elements() const;
  std::size_t count() const { return params_.size(); }

  // Deep copy: fresh buffers, identical bytes.
  ParamStore clone() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Versioned binary checkpoint; values round-trip bit-exactly.
  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

 private:
  std::map<std::string, Tensor> params_;
};

// Zeroes parameter gradients, sweeps the graph from `loss`, and returns a
// copy of each parameter's gradient. Parameters the loss never touched come
// back as zeros.
std::map<std::string, std::vector<double>> reverse_accumulate(Tensor& loss, ParamStore& params);

}  // namespace vgs
