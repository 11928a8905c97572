#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hiasa/ndcore/params.hpp"

namespace hiasa::nd {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers for one parameter tensor.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update. `t` is the 1-based step index.
inline void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& state,
                      std::size_t t, const AdamOptions& opt) {
  if (grad.size() != param.size()) throw ShapeError("adam_step: gradient/parameter size mismatch");
  if (state.m.empty()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  for (double g : grad)
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * grad[i];
    state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    param[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

/// Adam over every tensor of a ParameterStore, in registration order.
class Adam {
 public:
  explicit Adam(AdamOptions opt = {}) : opt_(opt) {}

  void step(ParameterStore& params) {
    if (moments_.empty()) moments_.resize(params.size());
    if (moments_.size() != params.size()) throw std::logic_error("Adam: parameter set changed");
    ++t_;
    std::size_t i = 0;
    for (auto& e : params) {
      try {
        adam_step(e.tensor.values(), e.tensor.grad(), moments_[i++], t_, opt_);
      } catch (const NumericError&) {
        throw NumericError("adam_step: non-finite gradient in parameter '" + e.name + "'");
      }
    }
  }

  std::size_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return opt_; }

 private:
  AdamOptions opt_;
  std::vector<AdamMoments> moments_;
  std::size_t t_ = 0;
};

}  // namespace hiasa::nd
