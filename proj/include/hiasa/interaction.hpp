#pragma once

#include <string>

#include "hiasa/config.hpp"
#include "hiasa/encoder.hpp"
#include "hiasa/ndcore/ops.hpp"

namespace hiasa {

inline constexpr double kMaxAlpha = 0.5;

inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= kMaxAlpha))
    throw ConfigError("alpha " + std::to_string(alpha) + " outside [0, 0.5]");
}

/// Constrained cross-stitch unit: each task keeps (1 - alpha) of its own
/// features and takes alpha from the other task.
///
///   aspect'    = alpha * sentiment + (1 - alpha) * aspect
///   sentiment' = alpha * aspect    + (1 - alpha) * sentiment
inline TaskFeatures cross_stitch(const TaskFeatures& in, double alpha) {
  check_alpha(alpha);
  if (in.level != 0) throw std::invalid_argument("cross_stitch expects level-0 features");
  if (in.aspect.shape() != in.sentiment.shape())
    throw nd::ShapeError("cross_stitch: feature shapes " + nd::to_string(in.aspect.shape()) + " and " +
                         nd::to_string(in.sentiment.shape()) + " differ");
  // alpha = 0 is plain parallel encoding; pass features through untouched.
  if (alpha == 0.0) return {in.aspect, in.sentiment, 1};
  using nd::add;
  using nd::scale;
  const double keep = 1.0 - alpha;
  return {add(scale(in.aspect, keep), scale(in.sentiment, alpha)),
          add(scale(in.sentiment, keep), scale(in.aspect, alpha)), 1};
}

}  // namespace hiasa
