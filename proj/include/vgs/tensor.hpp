#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vgs/common.hpp"

namespace vgs {

struct Tensor;

// One recorded operation. `backward` reads the output's gradient buffer
// (captured by the op that built the node) and accumulates into the parents'
// gradient buffers. Parents are kept only to drive the topological walk.
struct GraphNode {
  std::vector<Tensor> parents;
  std::function<void()> backward;
};

// Dense float64 tensor with optional gradient and recorded provenance.
// Copies share storage. Ops allocate fresh outputs and, while gradient
// recording is enabled and some parent carries a gradient, attach a node.
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> data;
  std::shared_ptr<std::vector<double>> grad;
  std::shared_ptr<GraphNode> node;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  std::size_t size() const { return data ? data->size() : 0; }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  bool requires_grad() const { return grad != nullptr; }

  double value() const;  // scalar tensors only
  std::vector<double>& values() { return *data; }
  const std::vector<double>& values() const { return *data; }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  }
};

// Thread-local recording switch, so evaluation passes can run concurrently
// with recording disabled.
bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool saved_;
};

// Builds an op output in one step; the building block every op and any
// external custom node (e.g. the quantizer pass-through) goes through.
// `backward` must add into the parents' gradient buffers. It runs only if
// the output was recorded.
Tensor make_op(std::vector<int> shape, std::vector<double> values,
               std::vector<Tensor> parents,
               const std::function<void(Tensor& out)>& attach_backward);

// Reverse accumulation from a scalar loss. Gradients of every reachable
// tensor are accumulated; leaves keep theirs until zeroed by the caller.
// A graph is meant to be swept once per forward pass.
void backward(Tensor& loss);

void check_finite(const Tensor& t, const char* op);

}  // namespace vgs
