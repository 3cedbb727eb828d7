#pragma once

#include <cstddef>
#include <string>

namespace immf {

inline constexpr std::size_t kNumJoints = 22;
inline constexpr std::size_t kNumPoints = 1024;
inline constexpr std::size_t kNumSeeds = 32;
inline constexpr std::size_t kGridSide = 7;
inline constexpr std::size_t kGridTokens = kGridSide * kGridSide;
inline constexpr std::size_t kPoseDim = 3 + 3 * kNumJoints;

/// Sizes that differ between the desk preset and the full-size preset.
/// Every architectural ratio is kept identical between the two.
struct ScaleConfig {
  std::string name;
  std::size_t verts_full = 0;
  std::size_t verts_coarse = 0;
  std::size_t image_size = 0;
  std::size_t feature_dim = 0;

  std::size_t query_tokens() const { return kNumJoints + verts_coarse; }
  std::size_t token_dim() const { return 3 + feature_dim; }

  static ScaleConfig desk() { return {"desk", 430, 86, 56, 64}; }
  static ScaleConfig paper() { return {"paper", 10475, 655, 224, 2048}; }
  /// "desk" or "paper"; throws ValidationError otherwise.
  static ScaleConfig from_name(const std::string& name);
};

}  // namespace immf
