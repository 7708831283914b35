#include "vgs/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace vgs {

namespace {
thread_local bool t_grad_enabled = true;

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension in " + shape_to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : saved_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = saved_; }

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  Tensor t;
  std::size_t n = numel(shape);
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(n, 0.0);
  if (requires_grad) t.grad = std::make_shared<std::vector<double>>(n, 0.0);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != values.size())
    throw std::invalid_argument("tensor: value count does not match shape " + shape_to_string(shape));
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(std::move(values));
  if (requires_grad) t.grad = std::make_shared<std::vector<double>>(t.data->size(), 0.0);
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({}, {v}, requires_grad);
}

double Tensor::value() const {
  if (size() != 1) throw std::runtime_error("tensor: value() on non-scalar shape " + shape_to_string(shape));
  return (*data)[0];
}

Tensor make_op(std::vector<int> shape, std::vector<double> values,
               std::vector<Tensor> parents,
               const std::function<void(Tensor& out)>& attach_backward) {
  Tensor out = Tensor::from(std::move(shape), std::move(values), false);
  bool record = false;
  if (t_grad_enabled) {
    for (const Tensor& p : parents)
      if (p.requires_grad()) {
        record = true;
        break;
      }
  }
  if (record) {
    out.grad = std::make_shared<std::vector<double>>(out.data->size(), 0.0);
    out.node = std::make_shared<GraphNode>();
    out.node->parents = std::move(parents);
    attach_backward(out);
  }
  return out;
}

void backward(Tensor& loss) {
  if (loss.size() != 1)
    throw std::runtime_error("backward: loss must be scalar, got shape " + shape_to_string(loss.shape));
  if (!loss.requires_grad()) return;
  (*loss.grad)[0] = 1.0;
  if (!loss.node) return;

  // Iterative depth-first post-order over the node DAG.
  std::vector<GraphNode*> order;
  std::unordered_set<GraphNode*> seen;
  struct Frame {
    GraphNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack{{loss.node.get(), 0}};
  seen.insert(loss.node.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      GraphNode* p = f.node->parents[f.next_parent++].node.get();
      if (p && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) (*it)->backward();
}

void check_finite(const Tensor& t, const char* op) {
  for (double x : *t.data)
    if (!std::isfinite(x)) throw std::runtime_error(std::string(op) + ": non-finite value in output");
}

}  // namespace vgs
