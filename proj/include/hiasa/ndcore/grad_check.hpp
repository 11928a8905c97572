#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hiasa/ndcore/graph.hpp"

namespace hiasa::nd {

/// Builds a scalar loss on the supplied graph; parameters enter through
/// Graph::param so their gradients can be read back.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t entries = 0;
};

/// Compares reverse-mode gradients against central differences for every
/// entry of every parameter. Error per entry is
/// |analytic - numeric| / max(1, |numeric|).
inline GradCheckResult grad_check_detailed(const LossBuilder& f, const std::vector<Tensor*>& params,
                                           double step = 1e-5) {
  if (!(step >= 1e-7 && step <= 1e-3))
    throw std::invalid_argument("grad_check: step must lie in [1e-7, 1e-3]");
  for (Tensor* p : params) {
    p->set_requires_grad(true);
    p->zero_grad();
  }
  {
    Graph g(false);
    Var loss = f(g);
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
    g.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) analytic.emplace_back(p->grad().begin(), p->grad().end());

  auto evaluate = [&f]() {
    Graph g(false);
    return f(g).item();
  };

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + step;
      const double up = evaluate();
      p[i] = orig - step;
      const double down = evaluate();
      p[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(analytic[pi][i] - numeric) / std::max(1.0, std::abs(numeric));
      ++res.entries;
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_param = pi;
        res.worst_index = i;
      }
    }
  }
  return res;
}

inline double grad_check(const LossBuilder& f, const std::vector<Tensor*>& params,
                         double step = 1e-5) {
  return grad_check_detailed(f, params, step).max_rel_error;
}

}  // namespace hiasa::nd
