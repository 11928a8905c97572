#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "hiasa/ndcore/ops.hpp"

namespace hiasa {

inline constexpr double kSimplexTolerance = 1e-6;

/// KL(P || Q) in nats with Q floored at kLogEpsilon and 0·log 0 = 0.
inline nd::Var kl(nd::Var p, nd::Var q) {
  using namespace nd;
  if (p.shape() != q.shape())
    throw ShapeError("kl: shapes " + to_string(p.shape()) + " and " + to_string(q.shape()) + " differ");
  return sum(mul(p, sub(safe_log(p), safe_log(q))));
}

namespace detail {
inline void require_simplex(const nd::Tensor& t, const char* which) {
  double s = 0.0;
  for (double v : t.values()) {
    if (v < 0.0) throw std::invalid_argument(std::string("js_divergence: negative entry in ") + which);
    s += v;
  }
  if (std::abs(s - 1.0) > kSimplexTolerance)
    throw std::invalid_argument(std::string("js_divergence: ") + which + " sums to " + std::to_string(s));
}
}  // namespace detail

/// Jensen-Shannon divergence: the mean KL of each argument to their midpoint.
/// Symmetric and bounded by ln 2.
inline nd::Var js_divergence(nd::Var e, nd::Var a) {
  using namespace nd;
  if (e.shape() != a.shape())
    throw ShapeError("js_divergence: shapes " + to_string(e.shape()) + " and " + to_string(a.shape()) +
                     " differ");
  hiasa::detail::require_simplex(e.value(), "first distribution");
  hiasa::detail::require_simplex(a.value(), "second distribution");
  Var mid = scale(add(e, a), 0.5);
  return scale(add(kl(e, mid), kl(a, mid)), 0.5);
}

// Value-only conveniences over plain vectors.
inline double kl(std::span<const double> p, std::span<const double> q) {
  nd::Graph g;
  return kl(g.constant(nd::Tensor::column(p)), g.constant(nd::Tensor::column(q))).item();
}

inline double js_divergence(std::span<const double> p, std::span<const double> q) {
  nd::Graph g;
  return js_divergence(g.constant(nd::Tensor::column(p)), g.constant(nd::Tensor::column(q))).item();
}

struct LossBreakdown {
  double j_ae = 0.0;
  double j_sc = 0.0;
  double js = 0.0;
  double beta = 0.0;
  double total = 0.0;
};

inline LossBreakdown total_loss(double j_ae, double j_sc, double js, double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("total_loss: beta must be non-negative");
  return {j_ae, j_sc, js, beta, j_ae + j_sc + beta * js};
}

/// Graph form of the combined objective. With beta = 0 the JS term is left
/// out of the graph entirely, so it contributes no gradient.
inline nd::Var total_loss(nd::Var j_ae, nd::Var j_sc, nd::Var js, double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("total_loss: beta must be non-negative");
  nd::Var base = nd::add(j_ae, j_sc);
  if (beta == 0.0) return base;
  return nd::add(base, nd::scale(js, beta));
}

}  // namespace hiasa
