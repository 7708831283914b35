#pragma once

#include <utility>

#include "vgs/tensor.hpp"

namespace vgs {

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);

// W [n x k] applied to x [k] plus b [n].
Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b);

// W [n x k] applied to x [k].
Tensor matvec(const Tensor& w, const Tensor& x);

// Row-wise affine: X [t x k], W [n x k], b [n] -> [t x n].
Tensor linear_rows(const Tensor& x, const Tensor& w, const Tensor& b);

// axis 0 of a matrix normalizes each column over rows; axis 1 each row.
// Vectors only accept axis 0.
Tensor softmax_over_axis(const Tensor& x, int axis);
Tensor sum_over_axis(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);

Tensor dot(const Tensor& u, const Tensor& v);

// Vectors whose norm is at most `kNormGuard` pass through unchanged, with
// an identity backward, so near-zero inputs cannot blow up gradients.
inline constexpr double kNormGuard = 1e-8;
Tensor l2_normalize(const Tensor& v);

Tensor cosine_similarity(const Tensor& u, const Tensor& v);

Tensor concat(const Tensor& u, const Tensor& v);
Tensor slice(const Tensor& v, int begin, int end);
Tensor row(const Tensor& x, int r);
Tensor stack_rows(const std::vector<Tensor>& rows);

// X [t x c_in], W [c_out x c_in x k], b [c_out], output [ceil(t/stride) x c_out].
// Padding is floor((k-1)/2) zeros on the left and ceil((k-1)/2) on the right.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);

// Gate layout in the stacked weights/bias is [input, forget, cell, output].
// Returns (h, c).
std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const Tensor& w_ih,
                                    const Tensor& w_hh, const Tensor& b);

}  // namespace vgs
