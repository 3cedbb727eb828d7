#include "immf/tensor/adam.hpp"

#include <cmath>

#include "immf/common/error.hpp"

namespace immf::tensor {

void adam_update(std::span<float> param, std::span<const float> grad, std::span<float> m,
                 std::span<float> v, std::uint64_t step, const AdamConfig& cfg) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
    throw ShapeError("adam_update: parameter, gradient and moment sizes differ");
  if (step == 0) throw ValidationError("adam_update: step index is 1-based");
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = b1 * m[i] + (1.0 - b1) * g;
    const double vi = b2 * v[i] + (1.0 - b2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double update = cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps);
    param[i] = static_cast<float>(param[i] - update);
  }
}

void adam_step(ParamSet<float>& params, AdamState& state, const AdamConfig& cfg) {
  ++state.step;
  for (auto& [name, p] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(p.size(), 0.0f);
    if (v.empty()) v.assign(p.size(), 0.0f);
    auto grad = p.grad();
    std::vector<float> zeros;
    if (grad.empty()) {
      zeros.assign(p.size(), 0.0f);
      grad = zeros;
    }
    adam_update(p.mutable_data(), grad, m, v, state.step, cfg);
  }
}

}  // namespace immf::tensor
