#include "vgs/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace vgs {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::string shapes(const Tensor& a, const Tensor& b) {
  return shape_to_string(a.shape) + " vs " + shape_to_string(b.shape);
}

using Buf = std::shared_ptr<std::vector<double>>;

Tensor elementwise(const char* name, const Tensor& a, const Tensor& b,
                   double (*fwd)(double, double),
                   void (*bwd)(double da_out, double x, double y, double& da, double& db)) {
  require(a.shape == b.shape, std::string(name) + ": shape mismatch " + shapes(a, b));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd((*a.data)[i], (*b.data)[i]);
  return make_op(a.shape, std::move(out), {a, b}, [&](Tensor& o) {
    Buf og = o.grad, ad = a.data, bd = b.data, ag = a.grad, bg = b.grad;
    o.node->backward = [og, ad, bd, ag, bg, bwd] {
      for (std::size_t i = 0; i < og->size(); ++i) {
        double da = 0, db = 0;
        bwd((*og)[i], (*ad)[i], (*bd)[i], da, db);
        if (ag) (*ag)[i] += da;
        if (bg) (*bg)[i] += db;
      }
    };
  });
}

Tensor unary(const char* name, const Tensor& a, double (*fwd)(double),
             double (*dydx_from)(double x, double y)) {
  (void)name;
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd((*a.data)[i]);
  return make_op(a.shape, std::move(out), {a}, [&](Tensor& o) {
    Buf og = o.grad, od = o.data, ad = a.data, ag = a.grad;
    o.node->backward = [og, od, ad, ag, dydx_from] {
      for (std::size_t i = 0; i < og->size(); ++i)
        (*ag)[i] += (*og)[i] * dydx_from((*ad)[i], (*od)[i]);
    };
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double x, double y, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * (*a.data)[i];
  return make_op(a.shape, std::move(out), {a}, [&](Tensor& o) {
    Buf og = o.grad, ag = a.grad;
    o.node->backward = [og, ag, s] {
      for (std::size_t i = 0; i < og->size(); ++i) (*ag)[i] += s * (*og)[i];
    };
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*a.data)[i] + c;
  return make_op(a.shape, std::move(out), {a}, [&](Tensor& o) {
    Buf og = o.grad, ag = a.grad;
    o.node->backward = [og, ag] {
      for (std::size_t i = 0; i < og->size(); ++i) (*ag)[i] += (*og)[i];
    };
  });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) {
          double e = std::exp(-x);
          return 1.0 / (1.0 + e);
        }
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: expects matrices, got " + shapes(a, b));
  require(a.dim(1) == b.dim(0), "matmul: inner dimensions differ " + shapes(a, b));
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double av = (*a.data)[static_cast<std::size_t>(i) * k + p];
      for (int j = 0; j < n; ++j)
        out[static_cast<std::size_t>(i) * n + j] += av * (*b.data)[static_cast<std::size_t>(p) * n + j];
    }
  return make_op({m, n}, std::move(out), {a, b}, [&](Tensor& o) {
    Buf og = o.grad, ad = a.data, bd = b.data, ag = a.grad, bg = b.grad;
    o.node->backward = [og, ad, bd, ag, bg, m, k, n] {
      if (ag)
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double s = 0;
            for (int j = 0; j < n; ++j)
              s += (*og)[static_cast<std::size_t>(i) * n + j] * (*bd)[static_cast<std::size_t>(p) * n + j];
            (*ag)[static_cast<std::size_t>(i) * k + p] += s;
          }
      if (bg)
        for (int p = 0; p < k; ++p)
          for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int i = 0; i < m; ++i)
              s += (*ad)[static_cast<std::size_t>(i) * k + p] * (*og)[static_cast<std::size_t>(i) * n + j];
            (*bg)[static_cast<std::size_t>(p) * n + j] += s;
          }
    };
  });
}

Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
  require(w.rank() == 2 && x.rank() == 1, "affine: expects matrix and vector, got " + shapes(w, x));
  require(w.dim(1) == x.dim(0), "affine: width mismatch " + shapes(w, x));
  require(b.rank() == 1 && b.dim(0) == w.dim(0), "affine: bias mismatch " + shapes(w, b));
  int n = w.dim(0), k = w.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = (*b.data)[i];
    const double* wr = w.data->data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) s += wr[j] * (*x.data)[j];
    out[i] = s;
  }
  return make_op({n}, std::move(out), {w, x, b}, [&](Tensor& o) {
    Buf og = o.grad, wd = w.data, xd = x.data, wg = w.grad, xg = x.grad, bg = b.grad;
    o.node->backward = [og, wd, xd, wg, xg, bg, n, k] {
      for (int i = 0; i < n; ++i) {
        double g = (*og)[i];
        if (g == 0) continue;
        if (wg) {
          double* wr = wg->data() + static_cast<std::size_t>(i) * k;
          for (int j = 0; j < k; ++j) wr[j] += g * (*xd)[j];
        }
        if (xg) {
          const double* wr = wd->data() + static_cast<std::size_t>(i) * k;
          for (int j = 0; j < k; ++j) (*xg)[j] += g * wr[j];
        }
        if (bg) (*bg)[i] += g;
      }
    };
  });
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  require(w.rank() == 2 && x.rank() == 1, "matvec: expects matrix and vector, got " + shapes(w, x));
  require(w.dim(1) == x.dim(0), "matvec: width mismatch " + shapes(w, x));
  int n = w.dim(0), k = w.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = 0;
    const double* wr = w.data->data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) s += wr[j] * (*x.data)[j];
    out[i] = s;
  }
  return make_op({n}, std::move(out), {w, x}, [&](Tensor& o) {
    Buf og = o.grad, wd = w.data, xd = x.data, wg = w.grad, xg = x.grad;
    o.node->backward = [og, wd, xd, wg, xg, n, k] {
      for (int i = 0; i < n; ++i) {
        double g = (*og)[i];
        if (g == 0) continue;
        if (wg) {
          double* wr = wg->data() + static_cast<std::size_t>(i) * k;
          for (int j = 0; j < k; ++j) wr[j] += g * (*xd)[j];
        }
        if (xg) {
          const double* wr = wd->data() + static_cast<std::size_t>(i) * k;
          for (int j = 0; j < k; ++j) (*xg)[j] += g * wr[j];
        }
      }
    };
  });
}

Tensor linear_rows(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 2 && w.rank() == 2, "linear_rows: expects matrices, got " + shapes(x, w));
  require(x.dim(1) == w.dim(1), "linear_rows: width mismatch " + shapes(x, w));
  require(b.rank() == 1 && b.dim(0) == w.dim(0), "linear_rows: bias mismatch " + shapes(w, b));
  int t = x.dim(0), k = x.dim(1), n = w.dim(0);
  std::vector<double> out(static_cast<std::size_t>(t) * n);
  for (int r = 0; r < t; ++r) {
    const double* xr = x.data->data() + static_cast<std::size_t>(r) * k;
    for (int i = 0; i < n; ++i) {
      double s = (*b.data)[i];
      const double* wr = w.data->data() + static_cast<std::size_t>(i) * k;
      for (int j = 0; j < k; ++j) s += wr[j] * xr[j];
      out[static_cast<std::size_t>(r) * n + i] = s;
    }
  }
  return make_op({t, n}, std::move(out), {x, w, b}, [&](Tensor& o) {
    Buf og = o.grad, xd = x.data, wd = w.data, xg = x.grad, wg = w.grad, bg = b.grad;
    o.node->backward = [og, xd, wd, xg, wg, bg, t, k, n] {
      for (int r = 0; r < t; ++r) {
        const double* gr = og->data() + static_cast<std::size_t>(r) * n;
        const double* xr = xd->data() + static_cast<std::size_t>(r) * k;
        for (int i = 0; i < n; ++i) {
          double g = gr[i];
          if (g == 0) continue;
          if (wg) {
            double* wr = wg->data() + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < k; ++j) wr[j] += g * xr[j];
          }
          if (xg) {
            const double* wr = wd->data() + static_cast<std::size_t>(i) * k;
            double* xgr = xg->data() + static_cast<std::size_t>(r) * k;
            for (int j = 0; j < k; ++j) xgr[j] += g * wr[j];
          }
          if (bg) (*bg)[i] += g;
        }
      }
    };
  });
}

namespace {

// Softmax over a strided slice of length `len`, stride `stride`, offset `off`.
void softmax_slice(const std::vector<double>& in, std::vector<double>& out, std::size_t off,
                   std::size_t stride, std::size_t len) {
  double mx = in[off];
  for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, in[off + i * stride]);
  double z = 0;
  for (std::size_t i = 0; i < len; ++i) {
    double e = std::exp(in[off + i * stride] - mx);
    out[off + i * stride] = e;
    z += e;
  }
  for (std::size_t i = 0; i < len; ++i) out[off + i * stride] /= z;
}

void softmax_slice_bwd(const std::vector<double>& y, const std::vector<double>& gy,
                       std::vector<double>& gx, std::size_t off, std::size_t stride,
                       std::size_t len) {
  double dotp = 0;
  for (std::size_t i = 0; i < len; ++i) dotp += y[off + i * stride] * gy[off + i * stride];
  for (std::size_t i = 0; i < len; ++i) {
    std::size_t p = off + i * stride;
    gx[p] += y[p] * (gy[p] - dotp);
  }
}

struct AxisPlan {
  std::size_t slices, off_step, stride, len;
};

AxisPlan axis_plan(const char* name, const Tensor& x, int axis) {
  if (x.rank() == 1) {
    require(axis == 0, std::string(name) + ": axis out of range for vector");
    return {1, 0, 1, static_cast<std::size_t>(x.dim(0))};
  }
  require(x.rank() == 2, std::string(name) + ": expects vector or matrix, got " + shape_to_string(x.shape));
  require(axis == 0 || axis == 1, std::string(name) + ": axis out of range for matrix");
  std::size_t t = static_cast<std::size_t>(x.dim(0)), d = static_cast<std::size_t>(x.dim(1));
  if (axis == 0) return {d, 1, d, t};
  return {t, d, 1, d};
}

}  // namespace

Tensor softmax_over_axis(const Tensor& x, int axis) {
  AxisPlan pl = axis_plan("softmax_over_axis", x, axis);
  require(pl.len > 0, "softmax_over_axis: empty axis");
  std::vector<double> out(x.size());
  for (std::size_t s = 0; s < pl.slices; ++s)
    softmax_slice(*x.data, out, s * pl.off_step, pl.stride, pl.len);
  return make_op(x.shape, std::move(out), {x}, [&](Tensor& o) {
    Buf og = o.grad, od = o.data, xg = x.grad;
    o.node->backward = [og, od, xg, pl] {
      for (std::size_t s = 0; s < pl.slices; ++s)
        softmax_slice_bwd(*od, *og, *xg, s * pl.off_step, pl.stride, pl.len);
    };
  });
}

Tensor sum_over_axis(const Tensor& x, int axis) {
  AxisPlan pl = axis_plan("sum_over_axis", x, axis);
  require(x.rank() == 2, "sum_over_axis: expects a matrix, got " + shape_to_string(x.shape));
  std::vector<double> out(pl.slices, 0.0);
  for (std::size_t s = 0; s < pl.slices; ++s)
    for (std::size_t i = 0; i < pl.len; ++i) out[s] += (*x.data)[s * pl.off_step + i * pl.stride];
  int out_dim = static_cast<int>(pl.slices);
  return make_op({out_dim}, std::move(out), {x}, [&](Tensor& o) {
    Buf og = o.grad, xg = x.grad;
    o.node->backward = [og, xg, pl] {
      for (std::size_t s = 0; s < pl.slices; ++s)
        for (std::size_t i = 0; i < pl.len; ++i) (*xg)[s * pl.off_step + i * pl.stride] += (*og)[s];
    };
  });
}

Tensor sum_all(const Tensor& x) {
  double s = 0;
  for (double v : *x.data) s += v;
  return make_op({}, {s}, {x}, [&](Tensor& o) {
    Buf og = o.grad, xg = x.grad;
    o.node->backward = [og, xg] {
      for (double& g : *xg) g += (*og)[0];
    };
  });
}

Tensor dot(const Tensor& u, const Tensor& v) {
  require(u.rank() == 1 && v.rank() == 1 && u.dim(0) == v.dim(0),
          "dot: shape mismatch " + shapes(u, v));
  double s = 0;
  for (std::size_t i = 0; i < u.size(); ++i) s += (*u.data)[i] * (*v.data)[i];
  return make_op({}, {s}, {u, v}, [&](Tensor& o) {
    Buf og = o.grad, ud = u.data, vd = v.data, ug = u.grad, vg = v.grad;
    o.node->backward = [og, ud, vd, ug, vg] {
      double g = (*og)[0];
      for (std::size_t i = 0; i < ud->size(); ++i) {
        if (ug) (*ug)[i] += g * (*vd)[i];
        if (vg) (*vg)[i] += g * (*ud)[i];
      }
    };
  });
}

Tensor l2_normalize(const Tensor& v) {
  require(v.rank() == 1, "l2_normalize: expects a vector, got " + shape_to_string(v.shape));
  double n2 = 0;
  for (double x : *v.data) n2 += x * x;
  double n = std::sqrt(n2);
  if (n <= kNormGuard) {
    std::vector<double> out = *v.data;
    return make_op(v.shape, std::move(out), {v}, [&](Tensor& o) {
      Buf og = o.grad, vg = v.grad;
      o.node->backward = [og, vg] {
        for (std::size_t i = 0; i < og->size(); ++i) (*vg)[i] += (*og)[i];
      };
    });
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*v.data)[i] / n;
  return make_op(v.shape, std::move(out), {v}, [&](Tensor& o) {
    Buf og = o.grad, od = o.data, vg = v.grad;
    o.node->backward = [og, od, vg, n] {
      double proj = 0;
      for (std::size_t i = 0; i < og->size(); ++i) proj += (*od)[i] * (*og)[i];
      for (std::size_t i = 0; i < og->size(); ++i) (*vg)[i] += ((*og)[i] - (*od)[i] * proj) / n;
    };
  });
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
  require(u.rank() == 1 && v.rank() == 1 && u.dim(0) == v.dim(0),
          "cosine_similarity: shape mismatch " + shapes(u, v));
  double nu2 = 0, nv2 = 0, uv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    nu2 += (*u.data)[i] * (*u.data)[i];
    nv2 += (*v.data)[i] * (*v.data)[i];
    uv += (*u.data)[i] * (*v.data)[i];
  }
  double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
  require(nu > kNormGuard && nv > kNormGuard, "cosine_similarity: zero-norm input");
  double c = uv / (nu * nv);
  return make_op({}, {c}, {u, v}, [&](Tensor& o) {
    Buf og = o.grad, ud = u.data, vd = v.data, ug = u.grad, vg = v.grad;
    o.node->backward = [og, ud, vd, ug, vg, nu, nv, c] {
      double g = (*og)[0];
      for (std::size_t i = 0; i < ud->size(); ++i) {
        if (ug) (*ug)[i] += g * ((*vd)[i] / (nu * nv) - c * (*ud)[i] / (nu * nu));
        if (vg) (*vg)[i] += g * ((*ud)[i] / (nu * nv) - c * (*vd)[i] / (nv * nv));
      }
    };
  });
}

Tensor concat(const Tensor& u, const Tensor& v) {
  require(u.rank() == 1 && v.rank() == 1, "concat: expects vectors, got " + shapes(u, v));
  std::vector<double> out;
  out.reserve(u.size() + v.size());
  out.insert(out.end(), u.data->begin(), u.data->end());
  out.insert(out.end(), v.data->begin(), v.data->end());
  int n = u.dim(0) + v.dim(0);
  return make_op({n}, std::move(out), {u, v}, [&](Tensor& o) {
    Buf og = o.grad, ug = u.grad, vg = v.grad;
    std::size_t nu = u.size();
    o.node->backward = [og, ug, vg, nu] {
      if (ug)
        for (std::size_t i = 0; i < nu; ++i) (*ug)[i] += (*og)[i];
      if (vg)
        for (std::size_t i = nu; i < og->size(); ++i) (*vg)[i - nu] += (*og)[i];
    };
  });
}

Tensor slice(const Tensor& v, int begin, int end) {
  require(v.rank() == 1, "slice: expects a vector, got " + shape_to_string(v.shape));
  require(0 <= begin && begin <= end && end <= v.dim(0), "slice: range out of bounds");
  std::vector<double> out(v.data->begin() + begin, v.data->begin() + end);
  return make_op({end - begin}, std::move(out), {v}, [&](Tensor& o) {
    Buf og = o.grad, vg = v.grad;
    o.node->backward = [og, vg, begin] {
      for (std::size_t i = 0; i < og->size(); ++i) (*vg)[begin + i] += (*og)[i];
    };
  });
}

Tensor row(const Tensor& x, int r) {
  require(x.rank() == 2, "row: expects a matrix, got " + shape_to_string(x.shape));
  require(0 <= r && r < x.dim(0), "row: index out of range");
  int d = x.dim(1);
  std::size_t off = static_cast<std::size_t>(r) * d;
  std::vector<double> out(x.data->begin() + off, x.data->begin() + off + d);
  return make_op({d}, std::move(out), {x}, [&](Tensor& o) {
    Buf og = o.grad, xg = x.grad;
    o.node->backward = [og, xg, off] {
      for (std::size_t i = 0; i < og->size(); ++i) (*xg)[off + i] += (*og)[i];
    };
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  require(!rows.empty(), "stack_rows: no rows");
  int d = rows[0].dim(0);
  for (const Tensor& r : rows)
    require(r.rank() == 1 && r.dim(0) == d, "stack_rows: inconsistent row shapes");
  int t = static_cast<int>(rows.size());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(t) * d);
  for (const Tensor& r : rows) out.insert(out.end(), r.data->begin(), r.data->end());
  return make_op({t, d}, std::move(out), rows, [&](Tensor& o) {
    Buf og = o.grad;
    std::vector<Buf> grads;
    grads.reserve(rows.size());
    for (const Tensor& r : rows) grads.push_back(r.grad);
    std::size_t dd = static_cast<std::size_t>(d);
    o.node->backward = [og, grads, dd] {
      for (std::size_t r = 0; r < grads.size(); ++r) {
        if (!grads[r]) continue;
        for (std::size_t i = 0; i < dd; ++i) (*grads[r])[i] += (*og)[r * dd + i];
      }
    };
  });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  require(x.rank() == 2, "conv1d: input must be [time x channels], got " + shape_to_string(x.shape));
  require(w.rank() == 3, "conv1d: kernel must be [out x in x width], got " + shape_to_string(w.shape));
  require(x.dim(1) == w.dim(1), "conv1d: channel mismatch " + shapes(x, w));
  require(b.rank() == 1 && b.dim(0) == w.dim(0), "conv1d: bias mismatch " + shapes(w, b));
  require(stride >= 1, "conv1d: stride must be positive");
  int t = x.dim(0), cin = x.dim(1), cout = w.dim(0), k = w.dim(2);
  require(t >= 1, "conv1d: input shorter than one window after padding, shape " + shape_to_string(x.shape));
  int left = (k - 1) / 2;
  int padded = t + k - 1;
  int ot = (padded - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(ot) * cout);
  auto xat = [&](int ti, int c) -> double {
    return (ti < 0 || ti >= t) ? 0.0 : (*x.data)[static_cast<std::size_t>(ti) * cin + c];
  };
  for (int o = 0; o < ot; ++o)
    for (int co = 0; co < cout; ++co) {
      double s = (*b.data)[co];
      for (int ci = 0; ci < cin; ++ci)
        for (int j = 0; j < k; ++j)
          s += xat(o * stride - left + j, ci) *
               (*w.data)[(static_cast<std::size_t>(co) * cin + ci) * k + j];
      out[static_cast<std::size_t>(o) * cout + co] = s;
    }
  return make_op({ot, cout}, std::move(out), {x, w, b}, [&](Tensor& o) {
    Buf og = o.grad, xd = x.data, wd = w.data, xg = x.grad, wg = w.grad, bg = b.grad;
    o.node->backward = [og, xd, wd, xg, wg, bg, t, cin, cout, k, ot, stride, left] {
      for (int oi = 0; oi < ot; ++oi)
        for (int co = 0; co < cout; ++co) {
          double g = (*og)[static_cast<std::size_t>(oi) * cout + co];
          if (g == 0) continue;
          if (bg) (*bg)[co] += g;
          for (int ci = 0; ci < cin; ++ci)
            for (int j = 0; j < k; ++j) {
              int ti = oi * stride - left + j;
              if (ti < 0 || ti >= t) continue;
              std::size_t wi = (static_cast<std::size_t>(co) * cin + ci) * k + j;
              std::size_t xi = static_cast<std::size_t>(ti) * cin + ci;
              if (wg) (*wg)[wi] += g * (*xd)[xi];
              if (xg) (*xg)[xi] += g * (*wd)[wi];
            }
        }
    };
  });
}

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const Tensor& w_ih, const Tensor& w_hh, const Tensor& b) {
  require(h_prev.rank() == 1 && c_prev.rank() == 1 && h_prev.dim(0) == c_prev.dim(0),
          "lstm_step: state shape mismatch " + shapes(h_prev, c_prev));
  int h = h_prev.dim(0);
  require(w_ih.rank() == 2 && w_ih.dim(0) == 4 * h, "lstm_step: w_ih must have 4*h rows, got " + shape_to_string(w_ih.shape));
  require(w_hh.rank() == 2 && w_hh.dim(0) == 4 * h && w_hh.dim(1) == h,
          "lstm_step: w_hh shape mismatch " + shape_to_string(w_hh.shape));
  require(b.rank() == 1 && b.dim(0) == 4 * h, "lstm_step: bias shape mismatch " + shape_to_string(b.shape));
  Tensor pre = add(affine(w_ih, x, b), matvec(w_hh, h_prev));
  Tensor gi = sigmoid(slice(pre, 0, h));
  Tensor gf = sigmoid(slice(pre, h, 2 * h));
  Tensor gc = tanh(slice(pre, 2 * h, 3 * h));
  Tensor go = sigmoid(slice(pre, 3 * h, 4 * h));
  Tensor c = add(mul(gf, c_prev), mul(gi, gc));
  Tensor ho = mul(go, tanh(c));
  return {ho, c};
}

}  // namespace vgs
