#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace immf::bench {

struct GradCaseResult {
  std::string name;
  std::size_t checked = 0;      // sampled coordinates
  double max_rel_error = 0.0;
  std::string worst;            // "input[flat]" of the worst coordinate
  bool passed = false;
};

struct GradSuiteOptions {
  double h = 1e-4;
  double tolerance = 1e-4;
  /// Coordinates sampled per input tensor (every coordinate when the tensor is smaller).
  std::size_t samples_per_input = 6;
  std::size_t samples_per_param = 2;  // end-to-end cases
  std::uint64_t seed = 1;
};

/// Relative error |a - n| / max(|a|, |n|, 1e-3) between analytic and central
/// difference gradients.
double grad_rel_error(double analytic, double numeric);

/// Finite-difference checks in double over every differentiable op, the nn
/// building blocks, each fusion module and the end-to-end ImmFusion loss on a
/// 2-frame batch.
std::vector<GradCaseResult> run_gradient_suite(const GradSuiteOptions& opts = {});

}  // namespace immf::bench
