#pragma once

#include <array>
#include <span>
#include <vector>

#include "immf/bodysim/body_template.hpp"
#include "immf/common/rng.hpp"

namespace immf::bodysim {

struct Pose;

/// Per-joint bound on |angle| for each axis-angle component, radians.
struct JointLimits {
  std::array<Vec3, kNumJoints> max_abs{};
  Vec3 root_offset{};  // bound on |root_pos - 0| per axis, meters

  static const JointLimits& defaults();
  bool contains(const Pose& pose) const;
};

struct Pose {
  Vec3 root_pos{};
  std::array<Vec3, kNumJoints> joint_rot{};

  /// root_pos followed by the 22 rotations, 69 values.
  std::vector<float> to_params() const;
  static Pose from_params(std::span<const float> params);
};

inline constexpr std::size_t kMotionComponents = 4;

/// Coordinated periodic motion. A fixed basis shared by every sequence mixes
/// a few latent oscillators into the joint angles:
///   angle[j][a] = limit[j][a] * amplitude * sum_k B[j][a][k] * sin(freq[k] * t + phase[k])
/// with sum_k |B[j][a][k]| = 1, so every angle stays within its limit.
/// Sequences differ in their latent frequencies, phases and start time.
struct MotionState {
  double t = 0.0;
  double dt = 0.0;
  double amplitude = 0.0;
  std::array<double, kMotionComponents> freq{};
  std::array<double, kMotionComponents> phase{};
  Vec3 root_freq{};
  Vec3 root_phase{};

  /// Zero amplitude: every sample is the rest pose.
  static MotionState zero() { return {}; }
  static MotionState random(Rng& rng, double amplitude = 1.0);
};

/// B[j][a][k], rows L1-normalized. A constant of the synthetic world.
const std::array<std::array<std::array<double, kMotionComponents>, 3>, kNumJoints>& motion_basis();

/// Returns the pose at the current time and advances the state by a jittered step.
Pose sample_pose(Rng& rng, MotionState& state);

struct Skinned {
  std::vector<float> joints;  // 22 x 3
  std::vector<float> verts;   // V_full x 3
};

/// Linear blend skinning over the joint tree, accumulated in double.
Skinned skin(const BodyTemplate& tpl, const Pose& pose);

}  // namespace immf::bodysim
