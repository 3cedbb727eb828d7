#include "immf/bodysim/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "immf/common/error.hpp"

namespace immf::bodysim {

const JointLimits& JointLimits::defaults() {
  static const JointLimits limits = [] {
    JointLimits l;
    l.max_abs.fill({0.10, 0.10, 0.10});
    l.max_abs[0] = {0.15, 0.40, 0.10};
    l.max_abs[1] = l.max_abs[2] = {1.00, 0.30, 0.40};
    l.max_abs[3] = l.max_abs[6] = l.max_abs[9] = {0.25, 0.20, 0.15};
    l.max_abs[4] = l.max_abs[5] = {1.40, 0.05, 0.05};
    l.max_abs[7] = l.max_abs[8] = {0.30, 0.10, 0.15};
    l.max_abs[12] = {0.40, 0.50, 0.30};
    l.max_abs[15] = {0.20, 0.30, 0.15};
    l.max_abs[16] = l.max_abs[17] = {1.20, 0.80, 1.20};
    l.max_abs[18] = l.max_abs[19] = {1.50, 0.10, 0.10};
    l.max_abs[20] = l.max_abs[21] = {0.40, 0.30, 0.40};
    l.root_offset = {0.10, 0.0, 0.15};
    return l;
  }();
  return limits;
}

bool JointLimits::contains(const Pose& pose) const {
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a)
      if (std::abs(pose.joint_rot[j][a]) > max_abs[j][a]) return false;
  for (int a = 0; a < 3; ++a)
    if (std::abs(pose.root_pos[a]) > root_offset[a]) return false;
  return true;
}

std::vector<float> Pose::to_params() const {
  std::vector<float> out;
  out.reserve(kPoseDim);
  for (double v : root_pos) out.push_back(static_cast<float>(v));
  for (const auto& r : joint_rot)
    for (double v : r) out.push_back(static_cast<float>(v));
  return out;
}

Pose Pose::from_params(std::span<const float> params) {
  if (params.size() != kPoseDim)
    throw ShapeError("pose params: expected " + std::to_string(kPoseDim) + " values, got " +
                     std::to_string(params.size()));
  Pose p;
  for (int a = 0; a < 3; ++a) p.root_pos[a] = params[a];
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) p.joint_rot[j][a] = params[3 + 3 * j + a];
  return p;
}

const std::array<std::array<std::array<double, kMotionComponents>, 3>, kNumJoints>& motion_basis() {
  static const auto basis = [] {
    std::array<std::array<std::array<double, kMotionComponents>, 3>, kNumJoints> b{};
    Rng rng(0x6d6f74696f6eULL);  // "motion"
    for (auto& joint : b)
      for (auto& row : joint) {
        double norm = 0;
        for (auto& w : row) {
          w = rng.uniform(-1.0, 1.0);
          norm += std::abs(w);
        }
        for (auto& w : row) w /= norm;
      }
    return b;
  }();
  return basis;
}

MotionState MotionState::random(Rng& rng, double amplitude) {
  MotionState s;
  s.amplitude = std::clamp(amplitude, 0.0, 1.0);
  s.t = rng.uniform(0.0, 100.0);
  s.dt = rng.uniform(0.12, 0.25);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t k = 0; k < kMotionComponents; ++k) {
    s.freq[k] = rng.uniform(0.3, 1.2);
    s.phase[k] = rng.uniform(0.0, two_pi);
  }
  for (int a = 0; a < 3; ++a) {
    s.root_freq[a] = rng.uniform(0.1, 0.4);
    s.root_phase[a] = rng.uniform(0.0, two_pi);
  }
  return s;
}

Pose sample_pose(Rng& rng, MotionState& state) {
  const auto& limits = JointLimits::defaults();
  const auto& basis = motion_basis();
  std::array<double, kMotionComponents> latent{};
  for (std::size_t k = 0; k < kMotionComponents; ++k)
    latent[k] = std::sin(state.freq[k] * state.t + state.phase[k]);
  Pose p;
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) {
      double mix = 0;
      for (std::size_t k = 0; k < kMotionComponents; ++k) mix += basis[j][a][k] * latent[k];
      p.joint_rot[j][a] = limits.max_abs[j][a] * state.amplitude * mix;
    }
  for (int a = 0; a < 3; ++a)
    p.root_pos[a] = limits.root_offset[a] * state.amplitude *
                    std::sin(state.root_freq[a] * state.t + state.root_phase[a]);
  state.t += state.dt * rng.uniform(0.75, 1.25);
  return p;
}

Skinned skin(const BodyTemplate& tpl, const Pose& pose) {
  std::array<Mat3, kNumJoints> rot;
  std::array<Vec3, kNumJoints> pos;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const Mat3 local = axis_angle_to_matrix(pose.joint_rot[j]);
    const int p = tpl.parent[j];
    if (p < 0) {
      rot[j] = local;
      pos[j] = tpl.joints_rest[j] + pose.root_pos;
    } else {
      rot[j] = matmul3(rot[p], local);
      pos[j] = pos[p] + rotate(rot[p], tpl.joints_rest[j] - tpl.joints_rest[p]);
    }
  }

  Skinned out;
  out.joints.reserve(kNumJoints * 3);
  for (const auto& p : pos)
    for (double v : p) out.joints.push_back(static_cast<float>(v));

  const std::size_t nv = tpl.num_full();
  out.verts.resize(nv * 3);
  for (std::size_t i = 0; i < nv; ++i) {
    const Vec3 rest = tpl.full.vertex(i);
    Vec3 acc{0, 0, 0};
    const float* w = &tpl.skin_weights[i * kNumJoints];
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      if (w[j] == 0.0f) continue;
      acc = acc + static_cast<double>(w[j]) * (rotate(rot[j], rest - tpl.joints_rest[j]) + pos[j]);
    }
    for (int a = 0; a < 3; ++a) out.verts[3 * i + a] = static_cast<float>(acc[a]);
  }
  return out;
}

}  // namespace immf::bodysim
