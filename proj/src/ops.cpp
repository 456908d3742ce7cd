// SPDX-License-Identifier: Apache-2.0
#include "trajset/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <climits>
#include <string>

#include <cblas.h>

#include "trajset/error.hpp"

namespace trajset {

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

template <class... Ts>
Tape* recording(const Ts&... ts) {
  Tape* tape = active_tape();
  if (tape == nullptr) return nullptr;
  return (ts.requires_grad() || ...) ? tape : nullptr;
}

void check_finite(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

Tensor make_output(Shape shape, std::vector<double> values, const char* op,
                   Tape* tape) {
  check_finite(values, op);
  return Tensor(std::move(shape), std::move(values), tape != nullptr);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Row-major products on top of BLAS; all accumulate into C.

int blas_int(std::size_t v) {
  if (v > static_cast<std::size_t>(INT_MAX)) throw ShapeError("matrix dimension exceeds BLAS range");
  return static_cast<int>(v);
}

// C[m x n] += A[m x k] . B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  if (m == 0 || n == 0 || k == 0) return;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, blas_int(m), blas_int(n), blas_int(k),
              1.0, a, blas_int(k), b, blas_int(n), 1.0, c, blas_int(n));
}

// C[m x k] += A[m x n] . B^T where B is stored [k x n]
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  if (m == 0 || n == 0 || k == 0) return;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, blas_int(m), blas_int(k), blas_int(n),
              1.0, a, blas_int(n), b, blas_int(n), 1.0, c, blas_int(k));
}

// C[k x n] += A^T . B where A is stored [m x k] and B is [m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  if (m == 0 || n == 0 || k == 0) return;
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, blas_int(k), blas_int(n), blas_int(m),
              1.0, a, blas_int(k), b, blas_int(n), 1.0, c, blas_int(n));
}

// Splits `shape` around axis into (outer, axis size, inner).
struct AxisSplit {
  std::size_t outer = 1, size = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw ShapeError("axis out of range");
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.size = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Deriv deriv) {
  Tape* tape = recording(x);
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  Tensor y = make_output(x.shape(), std::move(out), op, tape);
  if (tape) {
    NodePtr xn = x.node(), yn = y.node();
    tape->record({xn}, yn, [xn, yn, deriv] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < yn->grad.size(); ++i) {
        xn->grad[i] += yn->grad[i] * deriv(xn->value[i], yn->value[i]);
      }
    });
  }
  return y;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  std::size_t batch = 1, m = 0, k = 0, n = 0;
  Shape out_shape;
  if (a.rank() == 2 && b.rank() == 2) {
    m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
      throw ShapeError("matmul: inner dimensions " + shape_str(a.shape()) + " . " +
                       shape_str(b.shape()));
    }
    out_shape = {m, n};
  } else if (a.rank() == 3 && b.rank() == 3) {
    batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    if (b.dim(0) != batch || b.dim(1) != k) {
      throw ShapeError("matmul: batched shapes " + shape_str(a.shape()) + " . " +
                       shape_str(b.shape()));
    }
    out_shape = {batch, m, n};
  } else {
    throw ShapeError("matmul expects two rank-2 or two rank-3 tensors");
  }

  Tape* tape = recording(a, b);
  std::vector<double> out(batch * m * n, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t t = 0; t < batch; ++t) {
    gemm_nn(av + t * m * k, bv + t * k * n, out.data() + t * m * n, m, k, n);
  }
  Tensor c = make_output(out_shape, std::move(out), "matmul", tape);
  if (tape) {
    NodePtr an = a.node(), bn = b.node(), cn = c.node();
    tape->record({an, bn}, cn, [an, bn, cn, batch, m, k, n] {
      const double* g = cn->grad.data();
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t t = 0; t < batch; ++t) {
          gemm_nt(g + t * m * n, bn->value.data() + t * k * n,
                  an->grad.data() + t * m * k, m, n, k);
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t t = 0; t < batch; ++t) {
          gemm_tn(an->value.data() + t * m * k, g + t * m * n,
                  bn->grad.data() + t * k * n, m, k, n);
        }
      }
    });
  }
  return c;
}

Tensor affine(const Tensor& x, const Tensor& w) { return affine(x, w, Tensor()); }

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() < 1 || w.rank() != 2 || x.shape().back() != w.dim(0)) {
    throw ShapeError("affine: input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(w.shape()));
  }
  const std::size_t din = w.dim(0), dout = w.dim(1);
  const bool has_bias = b.defined();
  if (has_bias && (b.rank() != 1 || b.dim(0) != dout)) {
    throw ShapeError("affine: bias " + shape_str(b.shape()) + " vs dout " +
                     std::to_string(dout));
  }
  const std::size_t rows = x.numel() / din;
  Tape* tape = has_bias ? recording(x, w, b) : recording(x, w);

  std::vector<double> out(rows * dout, 0.0);
  if (has_bias) {
    const auto bv = b.values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(bv.begin(), bv.end(), out.begin() + r * dout);
    }
  }
  gemm_nn(x.values().data(), w.values().data(), out.data(), rows, din, dout);
  Shape shape = x.shape();
  shape.back() = dout;
  Tensor y = make_output(std::move(shape), std::move(out), "affine", tape);
  if (tape) {
    NodePtr xn = x.node(), wn = w.node(), yn = y.node();
    NodePtr bn = has_bias ? b.node() : nullptr;
    std::vector<NodePtr> inputs{xn, wn};
    if (bn) inputs.push_back(bn);
    tape->record(std::move(inputs), yn, [xn, wn, bn, yn, rows, din, dout] {
      const double* g = yn->grad.data();
      if (xn->requires_grad) {
        xn->ensure_grad();
        gemm_nt(g, wn->value.data(), xn->grad.data(), rows, dout, din);
      }
      if (wn->requires_grad) {
        wn->ensure_grad();
        gemm_tn(xn->value.data(), g, wn->grad.data(), rows, din, dout);
      }
      if (bn && bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < dout; ++j) bn->grad[j] += g[r * dout + j];
        }
      }
    });
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tape* tape = recording(a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  Tensor c = make_output(a.shape(), std::move(out), "add", tape);
  if (tape) {
    NodePtr an = a.node(), bn = b.node(), cn = c.node();
    tape->record({an, bn}, cn, [an, bn, cn] {
      for (NodePtr n : {an, bn}) {
        if (!n->requires_grad) continue;
        n->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) n->grad[i] += cn->grad[i];
      }
    });
  }
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tape* tape = recording(a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  Tensor c = make_output(a.shape(), std::move(out), "sub", tape);
  if (tape) {
    NodePtr an = a.node(), bn = b.node(), cn = c.node();
    tape->record({an, bn}, cn, [an, bn, cn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) an->grad[i] += cn->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) bn->grad[i] -= cn->grad[i];
      }
    });
  }
  return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tape* tape = recording(a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  Tensor c = make_output(a.shape(), std::move(out), "mul", tape);
  if (tape) {
    NodePtr an = a.node(), bn = b.node(), cn = c.node();
    tape->record({an, bn}, cn, [an, bn, cn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) {
          an->grad[i] += cn->grad[i] * bn->value[i];
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) {
          bn->grad[i] += cn->grad[i] * an->value[i];
        }
      }
    });
  }
  return c;
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  Tape* tape = recording(a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (b.values()[i] == 0.0) throw NumericError("div: division by zero");
    out[i] = a.values()[i] / b.values()[i];
  }
  Tensor c = make_output(a.shape(), std::move(out), "div", tape);
  if (tape) {
    NodePtr an = a.node(), bn = b.node(), cn = c.node();
    tape->record({an, bn}, cn, [an, bn, cn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) {
          an->grad[i] += cn->grad[i] / bn->value[i];
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) {
          bn->grad[i] -= cn->grad[i] * cn->value[i] / bn->value[i];
        }
      }
    });
  }
  return c;
}

Tensor scale(const Tensor& x, double s) {
  return unary(
      x, "scale", [s](double v) { return v * s; },
      [s](double, double) { return s; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log_clamped(const Tensor& x, double floor) {
  return unary(
      x, "log_clamped", [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Tensor sum(const Tensor& x) {
  Tape* tape = recording(x);
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Tensor y = make_output({1}, {acc}, "sum", tape);
  if (tape) {
    NodePtr xn = x.node(), yn = y.node();
    tape->record({xn}, yn, [xn, yn] {
      xn->ensure_grad();
      const double g = yn->grad[0];
      for (double& v : xn->grad) v += g;
    });
  }
  return y;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor row_norm(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("row_norm needs rank >= 1");
  const std::size_t k = x.shape().back();
  const std::size_t rows = x.numel() / k;
  Tape* tape = recording(x);
  std::vector<double> out(rows);
  const auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += xv[r * k + j] * xv[r * k + j];
    out[r] = std::sqrt(acc);
  }
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  if (shape.empty()) shape = {1};
  Tensor y = make_output(std::move(shape), std::move(out), "row_norm", tape);
  if (tape) {
    NodePtr xn = x.node(), yn = y.node();
    tape->record({xn}, yn, [xn, yn, rows, k] {
      xn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double norm = yn->value[r];
        if (norm == 0.0) continue;
        const double g = yn->grad[r] / norm;
        for (std::size_t j = 0; j < k; ++j) xn->grad[r * k + j] += g * xn->value[r * k + j];
      }
    });
  }
  return y;
}

namespace {

Tensor softmax_impl(const Tensor& x, std::span<const std::uint8_t> excluded,
                    const char* op) {
  if (x.rank() < 1) throw ShapeError(std::string(op) + " needs rank >= 1");
  const bool masked = !excluded.empty();
  if (masked && excluded.size() != x.numel()) {
    throw ShapeError(std::string(op) + ": mask has " + std::to_string(excluded.size()) +
                     " entries for tensor " + shape_str(x.shape()));
  }
  const std::size_t n = x.shape().back();
  const std::size_t rows = n == 0 ? 0 : x.numel() / n;
  Tape* tape = recording(x);
  std::vector<double> out(x.numel());
  std::vector<double> logits(n);
  const auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * n;
    bool any_included = !masked;
    for (std::size_t j = 0; j < n; ++j) {
      const bool ex = masked && excluded[base + j] != 0;
      logits[j] = ex ? kExcludedLogit : xv[base + j];
      any_included = any_included || !ex;
    }
    if (!any_included) {
      std::fill_n(out.begin() + base, n, 0.0);
      continue;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[base + j] = std::exp(logits[j] - mx);
      z += out[base + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[base + j] /= z;
  }
  Tensor y = make_output(x.shape(), std::move(out), op, tape);
  if (tape) {
    NodePtr xn = x.node(), yn = y.node();
    tape->record({xn}, yn, [xn, yn, rows, n] {
      xn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += yn->grad[base + j] * yn->value[base + j];
        for (std::size_t j = 0; j < n; ++j) {
          xn->grad[base + j] += yn->value[base + j] * (yn->grad[base + j] - dot);
        }
      }
    });
  }
  return y;
}

}  // namespace

Tensor softmax_rows(const Tensor& x) { return softmax_impl(x, {}, "softmax_rows"); }

Tensor masked_softmax_rows(const Tensor& x, std::span<const std::uint8_t> excluded) {
  if (excluded.empty() && x.numel() != 0) {
    throw ShapeError("masked_softmax_rows: empty mask");
  }
  return softmax_impl(x, excluded, "masked_softmax_rows");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() < 1) throw ShapeError("layer_norm needs rank >= 1");
  const std::size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(d) + "]");
  }
  const std::size_t rows = x.numel() / d;
  Tape* tape = recording(x, gain, bias);
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  Tensor y = make_output(x.shape(), std::move(out), "layer_norm", tape);
  if (tape) {
    NodePtr xn = x.node(), gn = gain.node(), bn = bias.node(), yn = y.node();
    tape->record({xn, gn, bn}, yn,
                 [xn, gn, bn, yn, rows, d, xhat = std::move(xhat),
                  inv_std = std::move(inv_std)] {
                   const double* g = yn->grad.data();
                   if (gn->requires_grad) {
                     gn->ensure_grad();
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < d; ++j)
                         gn->grad[j] += g[r * d + j] * xhat[r * d + j];
                   }
                   if (bn->requires_grad) {
                     bn->ensure_grad();
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < d; ++j) bn->grad[j] += g[r * d + j];
                   }
                   if (!xn->requires_grad) return;
                   xn->ensure_grad();
                   const double inv_d = 1.0 / static_cast<double>(d);
                   for (std::size_t r = 0; r < rows; ++r) {
                     double m1 = 0.0, m2 = 0.0;
                     for (std::size_t j = 0; j < d; ++j) {
                       const double dh = g[r * d + j] * gn->value[j];
                       m1 += dh;
                       m2 += dh * xhat[r * d + j];
                     }
                     m1 *= inv_d;
                     m2 *= inv_d;
                     for (std::size_t j = 0; j < d; ++j) {
                       const double dh = g[r * d + j] * gn->value[j];
                       xn->grad[r * d + j] +=
                           inv_std[r] * (dh - m1 - xhat[r * d + j] * m2);
                     }
                   }
                 });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  Tape* tape = recording(x);
  Tensor y(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()),
           tape != nullptr);
  if (tape) {
    NodePtr xn = x.node(), yn = y.node();
    tape->record({xn}, yn, [xn, yn] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < yn->grad.size(); ++i) xn->grad[i] += yn->grad[i];
    });
  }
  return y;
}

namespace {

// Index decomposition for swapping axes a < b: [P, A, M, B, Q] -> [P, B, M, A, Q].
struct SwapDims {
  std::size_t p = 1, a = 1, m = 1, b = 1, q = 1;
};

template <class F>
void for_each_swap(const SwapDims& s, F&& f) {
  for (std::size_t ip = 0; ip < s.p; ++ip)
    for (std::size_t ia = 0; ia < s.a; ++ia)
      for (std::size_t im = 0; im < s.m; ++im)
        for (std::size_t ib = 0; ib < s.b; ++ib) {
          const std::size_t src = (((ip * s.a + ia) * s.m + im) * s.b + ib) * s.q;
          const std::size_t dst = (((ip * s.b + ib) * s.m + im) * s.a + ia) * s.q;
          f(src, dst, s.q);
        }
}

}  // namespace

Tensor transpose(const Tensor& x, std::size_t axis_a, std::size_t axis_b) {
  if (axis_a >= x.rank() || axis_b >= x.rank()) throw ShapeError("transpose: bad axis");
  if (axis_a == axis_b) return reshape(x, x.shape());
  if (axis_a > axis_b) std::swap(axis_a, axis_b);
  const Shape& in = x.shape();
  SwapDims s;
  for (std::size_t i = 0; i < axis_a; ++i) s.p *= in[i];
  s.a = in[axis_a];
  for (std::size_t i = axis_a + 1; i < axis_b; ++i) s.m *= in[i];
  s.b = in[axis_b];
  for (std::size_t i = axis_b + 1; i < in.size(); ++i) s.q *= in[i];
  Shape out_shape = in;
  std::swap(out_shape[axis_a], out_shape[axis_b]);

  Tape* tape = recording(x);
  std::vector<double> out(x.numel());
  const double* xv = x.values().data();
  for_each_swap(s, [&](std::size_t src, std::size_t dst, std::size_t len) {
    std::copy_n(xv + src, len, out.data() + dst);
  });
  Tensor y(std::move(out_shape), std::move(out), tape != nullptr);
  if (tape) {
    NodePtr xn = x.node(), yn = y.node();
    tape->record({xn}, yn, [xn, yn, s] {
      xn->ensure_grad();
      for_each_swap(s, [&](std::size_t src, std::size_t dst, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) xn->grad[src + i] += yn->grad[dst + i];
      });
    });
  }
  return y;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.rank() != ref.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i != axis && p.dim(i) != ref[i]) {
        throw ShapeError("concat: shape " + shape_str(p.shape()) + " vs " + shape_str(ref));
      }
    }
    out_shape[axis] += p.dim(axis);
    any_grad = any_grad || p.requires_grad();
  }
  Tape* tape = any_grad ? active_tape() : nullptr;
  const AxisSplit out_split = split_at(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t block = p.dim(axis) * out_split.inner;
    for (std::size_t o = 0; o < out_split.outer; ++o) {
      std::copy_n(p.values().data() + o * block, block,
                  out.data() + o * out_split.size * out_split.inner + offset);
    }
    offset += block;
  }
  Tensor y(std::move(out_shape), std::move(out), tape != nullptr);
  if (tape) {
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    NodePtr yn = y.node();
    tape->record(nodes, yn, [nodes, yn, out_split, axis] {
      std::size_t off = 0;
      for (const auto& n : nodes) {
        const std::size_t block = n->shape[axis] * out_split.inner;
        if (n->requires_grad) {
          n->ensure_grad();
          for (std::size_t o = 0; o < out_split.outer; ++o) {
            const double* src = yn->grad.data() + o * out_split.size * out_split.inner + off;
            double* dst = n->grad.data() + o * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        }
        off += block;
      }
    });
  }
  return y;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t length) {
  const AxisSplit s = split_at(x.shape(), axis);
  if (begin + length > s.size) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " +
                     std::to_string(begin + length) + ") out of axis size " +
                     std::to_string(s.size));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  Tape* tape = recording(x);
  const std::size_t block = length * s.inner;
  std::vector<double> out(s.outer * block);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.values().data() + (o * s.size + begin) * s.inner, block,
                out.data() + o * block);
  }
  Tensor y(std::move(out_shape), std::move(out), tape != nullptr);
  if (tape) {
    NodePtr xn = x.node(), yn = y.node();
    tape->record({xn}, yn, [xn, yn, s, begin, block] {
      xn->ensure_grad();
      for (std::size_t o = 0; o < s.outer; ++o) {
        double* dst = xn->grad.data() + (o * s.size + begin) * s.inner;
        const double* src = yn->grad.data() + o * block;
        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    });
  }
  return y;
}

std::vector<Tensor> split(const Tensor& x, std::size_t axis,
                          const std::vector<std::size_t>& sizes) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (axis >= x.rank() || total != x.dim(axis)) {
    throw ShapeError("split: sizes do not cover axis of " + shape_str(x.shape()));
  }
  std::vector<Tensor> parts;
  std::size_t begin = 0;
  for (auto len : sizes) {
    parts.push_back(slice(x, axis, begin, len));
    begin += len;
  }
  return parts;
}

Tensor repeat_axis(const Tensor& x, std::size_t axis, std::size_t times) {
  const AxisSplit s = split_at(x.shape(), axis);
  if (s.size != 1) throw ShapeError("repeat_axis: axis must have size 1");
  Shape out_shape = x.shape();
  out_shape[axis] = times;
  Tape* tape = recording(x);
  std::vector<double> out(s.outer * times * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t t = 0; t < times; ++t)
      std::copy_n(x.values().data() + o * s.inner, s.inner,
                  out.data() + (o * times + t) * s.inner);
  Tensor y(std::move(out_shape), std::move(out), tape != nullptr);
  if (tape) {
    NodePtr xn = x.node(), yn = y.node();
    tape->record({xn}, yn, [xn, yn, s, times] {
      xn->ensure_grad();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t t = 0; t < times; ++t)
          for (std::size_t i = 0; i < s.inner; ++i)
            xn->grad[o * s.inner + i] += yn->grad[(o * times + t) * s.inner + i];
    });
  }
  return y;
}

}  // namespace trajset
