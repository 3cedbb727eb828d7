#pragma once

#include <string>
#include <vector>

namespace immf::bench {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Finite-difference suite (h = 1e-4, relative error < 1e-4).
CheckResult check_gradients();
/// fps against a brute-force greedy max-min oracle on `clouds` random clouds of at most 64 points.
CheckResult check_fps_oracle(std::size_t clouds = 200);
/// Paper-scale token shapes and a finite forward pass.
CheckResult check_paper_shapes();
/// Forced modality masking makes outputs independent of the masked input, bitwise.
CheckResult check_masking_invariance();
/// frame_errors against a scalar-loop oracle at 1e-9, plus max >= mean.
CheckResult check_metric_oracle(std::size_t instances = 1000);
/// Dataset and checkpoint files round-trip bitwise.
CheckResult check_persistence();
/// 8 lab frames, 300 Adam steps at lr 1e-3: training mean joint error < 2 cm.
CheckResult check_overfit();

/// gradients, fps, shapes, masking, metrics, persistence, overfit.
const std::vector<std::string>& suite_names();
/// One suite by name, or every suite for "all". Throws ValidationError on an unknown name.
std::vector<CheckResult> run_suite(const std::string& name);

}  // namespace immf::bench
