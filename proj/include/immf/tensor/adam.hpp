#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "immf/tensor/nn.hpp"

namespace immf::tensor {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
};

/// One bias-corrected Adam update of a single array. `step` is the 1-based
/// index of this update.
void adam_update(std::span<float> param, std::span<const float> grad, std::span<float> m,
                 std::span<float> v, std::uint64_t step, const AdamConfig& cfg);

/// Updates every parameter from its accumulated gradient (a parameter that
/// never received a gradient is treated as having a zero gradient).
void adam_step(ParamSet<float>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace immf::tensor
