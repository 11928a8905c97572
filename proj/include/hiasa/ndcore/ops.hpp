#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hiasa/ndcore/graph.hpp"

// Differentiable operations on rank-2 tensors. Every op validates shapes,
// computes its forward value eagerly and records a backward closure that
// accumulates into the gradient buffers of its inputs.

namespace hiasa::nd {

namespace detail {

inline Graph& graph_of(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw std::invalid_argument("operands belong to different graphs");
  return *a.graph;
}

[[noreturn]] inline void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                   to_string(b));
}

// Broadcast rule for the right operand of elementwise binaries: same shape,
// scalar, row vector over rows, or column vector over columns.
enum class Bcast { same, scalar, row, col };

inline Bcast broadcast_kind(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Bcast::same;
  if (b.rows == 1 && b.cols == 1) return Bcast::scalar;
  if (b.rows == 1 && b.cols == a.cols) return Bcast::row;
  if (b.cols == 1 && b.rows == a.rows) return Bcast::col;
  shape_fail(op, a, b);
}

inline std::size_t bindex(Bcast k, std::size_t r, std::size_t c, std::size_t cols) {
  switch (k) {
    case Bcast::same: return r * cols + c;
    case Bcast::scalar: return 0;
    case Bcast::row: return c;
    case Bcast::col: return r;
  }
  return 0;
}

template <class Fwd, class DA, class DB>
Var binary(const char* op, Var a, Var b, Fwd fwd, DA da, DB db) {
  Graph& g = graph_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Bcast kind = broadcast_kind(op, x.shape(), y.shape());
  const std::size_t R = x.rows(), C = x.cols();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c)
      out[r * C + c] = fwd(x[r * C + c], y[bindex(kind, r, c, C)]);
  const std::size_t ia = a.id, ib = b.id;
  const bool need = g.needs_grad(ia) || g.needs_grad(ib);
  return g.record(std::move(out), need, [&g, ia, ib, kind, R, C, da, db](std::size_t self) {
    const Tensor& X = g.tensor(ia);
    const Tensor& Y = g.tensor(ib);
    const Tensor& O = g.tensor(self);
    auto go = O.grad();
    const bool ga_on = g.needs_grad(ia), gb_on = g.needs_grad(ib);
    auto ga = ga_on ? g.grad(ia) : std::span<double>{};
    auto gb = gb_on ? g.grad(ib) : std::span<double>{};
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t i = r * C + c;
        const std::size_t j = bindex(kind, r, c, C);
        if (ga_on) ga[i] += go[i] * da(X[i], Y[j], O[i]);
        if (gb_on) gb[j] += go[i] * db(X[i], Y[j], O[i]);
      }
  }, op);
}

template <class Fwd, class D>
Var unary(const char* op, Var a, Fwd fwd, D d) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  const std::size_t ia = a.id;
  return g.record(std::move(out), g.needs_grad(ia), [&g, ia, d](std::size_t self) {
    const Tensor& X = g.tensor(ia);
    const Tensor& O = g.tensor(self);
    auto go = O.grad();
    auto ga = g.grad(ia);
    for (std::size_t i = 0; i < X.size(); ++i) ga[i] += go[i] * d(X[i], O[i]);
  }, op);
}

}  // namespace detail

// out = a · b
inline Var matmul(Var a, Var b) {
  Graph& g = detail::graph_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) detail::shape_fail("matmul", x.shape(), y.shape());
  const std::size_t R = x.rows(), K = x.cols(), C = y.cols();
  Tensor out({R, C});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t k = 0; k < K; ++k) {
      const double xv = x[r * K + k];
      if (xv == 0.0) continue;
      for (std::size_t c = 0; c < C; ++c) out[r * C + c] += xv * y[k * C + c];
    }
  const std::size_t ia = a.id, ib = b.id;
  const bool need = g.needs_grad(ia) || g.needs_grad(ib);
  return g.record(std::move(out), need, [&g, ia, ib, R, K, C](std::size_t self) {
    const Tensor& X = g.tensor(ia);
    const Tensor& Y = g.tensor(ib);
    auto go = g.tensor(self).grad();
    if (g.needs_grad(ia)) {
      auto ga = g.grad(ia);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
          double s = 0.0;
          for (std::size_t c = 0; c < C; ++c) s += go[r * C + c] * Y[k * C + c];
          ga[r * K + k] += s;
        }
    }
    if (g.needs_grad(ib)) {
      auto gb = g.grad(ib);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
          const double xv = X[r * K + k];
          if (xv == 0.0) continue;
          for (std::size_t c = 0; c < C; ++c) gb[k * C + c] += xv * go[r * C + c];
        }
    }
  }, "matmul");
}

inline Var transpose(Var a) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t R = x.rows(), C = x.cols();
  Tensor out({C, R});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[c * R + r] = x[r * C + c];
  const std::size_t ia = a.id;
  return g.record(std::move(out), g.needs_grad(ia), [&g, ia, R, C](std::size_t self) {
    auto go = g.tensor(self).grad();
    auto ga = g.grad(ia);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += go[c * R + r];
  }, "transpose");
}

inline Var add(Var a, Var b) {
  return detail::binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail::binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail::binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

inline Var div(Var a, Var b) {
  return detail::binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

// out = scale * a + shift
inline Var affine(Var a, double scale, double shift = 0.0) {
  return detail::unary(
      "affine", a, [scale, shift](double x) { return scale * x + shift; },
      [scale](double, double) { return scale; });
}

inline Var scale(Var a, double s) { return affine(a, s, 0.0); }

inline Var sigmoid(Var a) {
  return detail::unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double o) { return o * (1.0 - o); });
}

inline Var tanh(Var a) {
  return detail::unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double o) { return 1.0 - o * o; });
}

inline Var log(Var a) {
  return detail::unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

/// max(a, eps); gradient passes only where a > eps.
inline Var clamp_min(Var a, double eps) {
  return detail::unary(
      "clamp_min", a, [eps](double x) { return x > eps ? x : eps; },
      [eps](double x, double) { return x > eps ? 1.0 : 0.0; });
}

/// Floor applied before every logarithm of a probability.
inline constexpr double kLogEpsilon = 1e-12;

/// log(max(a, kLogEpsilon)).
inline Var safe_log(Var a) { return log(clamp_min(a, kLogEpsilon)); }

/// Softmax along `axis` (1: across each row's columns, 0: down each column).
inline Var softmax(Var a, int axis = 1) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  const std::size_t R = x.rows(), C = x.cols();
  const std::size_t lanes = axis == 1 ? R : C;
  const std::size_t len = axis == 1 ? C : R;
  auto at = [axis, C](std::size_t lane, std::size_t k) {
    return axis == 1 ? lane * C + k : k * C + lane;
  };
  Tensor out(x.shape());
  for (std::size_t l = 0; l < lanes; ++l) {
    double mx = -INFINITY;
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, x[at(l, k)]);
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) z += (out[at(l, k)] = std::exp(x[at(l, k)] - mx));
    for (std::size_t k = 0; k < len; ++k) out[at(l, k)] /= z;
  }
  const std::size_t ia = a.id;
  return g.record(std::move(out), g.needs_grad(ia), [&g, ia, lanes, len, at](std::size_t self) {
    const Tensor& O = g.tensor(self);
    auto go = O.grad();
    auto ga = g.grad(ia);
    for (std::size_t l = 0; l < lanes; ++l) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += go[at(l, k)] * O[at(l, k)];
      for (std::size_t k = 0; k < len; ++k) ga[at(l, k)] += O[at(l, k)] * (go[at(l, k)] - dot);
    }
  }, "softmax");
}

/// Sum of all entries as a 1×1 tensor.
inline Var sum(Var a) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.values()) s += v;
  const std::size_t ia = a.id;
  return g.record(Tensor({1, 1}, s), g.needs_grad(ia), [&g, ia](std::size_t self) {
    const double go = g.tensor(self).grad()[0];
    for (double& v : g.grad(ia)) v += go;
  }, "sum");
}

/// Sum along `axis`: 0 reduces rows (result 1×C), 1 reduces columns (R×1).
inline Var sum(Var a, int axis) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  if (axis != 0 && axis != 1) throw ShapeError("sum: axis must be 0 or 1");
  const std::size_t R = x.rows(), C = x.cols();
  Tensor out(axis == 0 ? Shape{1, C} : Shape{R, 1});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[axis == 0 ? c : r] += x[r * C + c];
  const std::size_t ia = a.id;
  return g.record(std::move(out), g.needs_grad(ia), [&g, ia, axis, R, C](std::size_t self) {
    auto go = g.tensor(self).grad();
    auto ga = g.grad(ia);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += go[axis == 0 ? c : r];
  }, "sum_axis");
}

inline Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

inline Var mean(Var a, int axis) {
  const Shape s = a.shape();
  const std::size_t n = axis == 0 ? s.rows : s.cols;
  if (n == 0) throw ShapeError("mean: empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(n));
}

/// Concatenate along `axis` (0 stacks rows, 1 stacks columns).
inline Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Graph& g = *parts.front().graph;
  const Shape first = parts.front().shape();
  std::size_t R = first.rows, C = first.cols;
  for (std::size_t p = 1; p < parts.size(); ++p) {
    if (parts[p].graph != &g) throw std::invalid_argument("concat: operands from different graphs");
    const Shape s = parts[p].shape();
    if (axis == 0) {
      if (s.cols != C) detail::shape_fail("concat", first, s);
      R += s.rows;
    } else {
      if (s.rows != R) detail::shape_fail("concat", first, s);
      C += s.cols;
    }
  }
  Tensor out({R, C});
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  bool need = false;
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& x = p.value();
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) {
        if (axis == 0) out[(off + r) * C + c] = x(r, c);
        else out[r * C + off + c] = x(r, c);
      }
    ids.push_back(p.id);
    offsets.push_back(off);
    need = need || g.needs_grad(p.id);
    off += axis == 0 ? x.rows() : x.cols();
  }
  return g.record(std::move(out), need, [&g, ids, offsets, axis, C](std::size_t self) {
    auto go = g.tensor(self).grad();
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!g.needs_grad(ids[p])) continue;
      const Tensor& x = g.tensor(ids[p]);
      auto gx = g.grad(ids[p]);
      const std::size_t xc = x.cols();
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < xc; ++c)
          gx[r * xc + c] += axis == 0 ? go[(offsets[p] + r) * C + c] : go[r * C + offsets[p] + c];
    }
  }, "concat");
}

/// Half-open range [begin, end) along `axis`.
inline Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  if (axis != 0 && axis != 1) throw ShapeError("slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if (begin >= end || end > extent)
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + to_string(x.shape()));
  const std::size_t R = axis == 0 ? end - begin : x.rows();
  const std::size_t C = axis == 1 ? end - begin : x.cols();
  const std::size_t XC = x.cols();
  Tensor out({R, C});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c)
      out[r * C + c] = axis == 0 ? x[(begin + r) * XC + c] : x[r * XC + begin + c];
  const std::size_t ia = a.id;
  return g.record(std::move(out), g.needs_grad(ia),
                  [&g, ia, axis, begin, R, C, XC](std::size_t self) {
    auto go = g.tensor(self).grad();
    auto ga = g.grad(ia);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t src = axis == 0 ? (begin + r) * XC + c : r * XC + begin + c;
        ga[src] += go[r * C + c];
      }
  }, "slice");
}

/// Selects rows by index (repeats allowed); backward scatter-adds.
inline Var gather_rows(Var a, std::vector<std::size_t> rows) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t C = x.cols();
  Tensor out({rows.size(), C});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows())
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                       to_string(x.shape()));
    std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(rows[i] * C), C,
                out.values().begin() + static_cast<std::ptrdiff_t>(i * C));
  }
  const std::size_t ia = a.id;
  return g.record(std::move(out), g.needs_grad(ia),
                  [&g, ia, rows = std::move(rows), C](std::size_t self) {
    auto go = g.tensor(self).grad();
    auto ga = g.grad(ia);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < C; ++c) ga[rows[i] * C + c] += go[i * C + c];
  }, "gather_rows");
}

/// Inverted dropout: active only on training graphs with rate > 0.
inline Var dropout(Var a, double rate) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  Graph& g = *a.graph;
  if (!g.training() || rate == 0.0) return a;
  const Tensor& x = a.value();
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  std::vector<double> m(x.size());
  for (double& v : m) v = keep(g.rng()) ? s : 0.0;
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * m[i];
  const std::size_t ia = a.id;
  return g.record(std::move(out), g.needs_grad(ia), [&g, ia, m = std::move(m)](std::size_t self) {
    auto go = g.tensor(self).grad();
    auto ga = g.grad(ia);
    for (std::size_t i = 0; i < m.size(); ++i) ga[i] += go[i] * m[i];
  }, "dropout");
}

/// Width-3 mean pooling down each column with zero padding and a fixed
/// divisor of 3: out[i] = (x[i-1] + x[i] + x[i+1]) / 3.
inline Var pool3(Var a) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t R = x.rows(), C = x.cols();
  auto window = [R, C](std::span<const double> v, std::size_t r, std::size_t c) {
    double s = v[r * C + c];
    if (r > 0) s += v[(r - 1) * C + c];
    if (r + 1 < R) s += v[(r + 1) * C + c];
    return s / 3.0;
  };
  Tensor out(x.shape());
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] = window(x.values(), r, c);
  const std::size_t ia = a.id;
  return g.record(std::move(out), g.needs_grad(ia), [&g, ia, R, C, window](std::size_t self) {
    auto go = g.tensor(self).grad();
    auto ga = g.grad(ia);
    // The window operator is symmetric, so its adjoint is itself.
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += window(go, r, c);
  }, "pool3");
}

}  // namespace hiasa::nd
