#pragma once

// Finite-difference verification of backprop_batch.

#include <cstdint>

#include "bcf/trainer.hpp"

namespace bcf {

struct GradCheckResult {
  int checked = 0;
  int passed = 0;
  /// Parameters whose stencil straddles a kink (half-float piece boundary,
  /// clamp or ReLU): the forward and backward one-sided differences disagree.
  /// They are counted in `checked` but never in `passed`.
  int kinks = 0;
  double worst_relative_error = 0.0;

  double pass_rate() const { return checked ? double(passed) / checked : 1.0; }
};

/// Compares the analytic gradient of loss_batch with central differences on
/// `samples` parameters drawn without replacement (all of them if fewer).
/// Steps: 1e-4 for block endpoints (code units), 1e-6 for everything else.
/// Relative error is |a - f| / max(|a|, |f|), and gradients both below
/// `floor` in magnitude count as agreeing.
GradCheckResult check_gradients(const Model& model, const MaterialStack& stack, const Batch& batch, int samples,
                                std::uint64_t seed, double tolerance = 1e-3, double floor = 1e-9);

}  // namespace bcf
