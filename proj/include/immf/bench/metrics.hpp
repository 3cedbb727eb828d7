#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "immf/bodysim/dataset.hpp"
#include "immf/trainer/model.hpp"

namespace immf::bench {

/// Per-frame Euclidean errors in centimeters.
struct FrameErrors {
  double mean_joint_cm = 0.0;
  double max_joint_cm = 0.0;
  double mean_vertex_cm = 0.0;
  double max_vertex_cm = 0.0;
};

/// All inputs are flat N x 3 arrays; predictions and ground truth must agree in
/// length. Accumulates in double. Throws ShapeError on a mismatch.
FrameErrors frame_errors(std::span<const float> pred_joints, std::span<const float> pred_verts,
                         std::span<const float> gt_joints, std::span<const float> gt_verts);
FrameErrors frame_errors(std::span<const double> pred_joints, std::span<const double> pred_verts,
                         std::span<const double> gt_joints, std::span<const double> gt_verts);

struct MetricsRow {
  std::string variant;
  std::string scene;
  std::uint64_t seed = 0;
  std::size_t frames = 0;
  double mean_joint_cm = 0.0;
  double max_joint_cm = 0.0;
  double mean_vertex_cm = 0.0;
  double max_vertex_cm = 0.0;
};

/// Unweighted mean over frames of every field (so the max columns are the mean
/// of per-frame maxima).
MetricsRow aggregate(const std::string& variant, const std::string& scene, std::uint64_t seed,
                     std::span<const FrameErrors> frames);

/// Inference-mode forward over every frame.
std::vector<FrameErrors> evaluate(const trainer::Model& model, const tensor::ParamSet<float>& params,
                                  const std::vector<bodysim::Frame>& frames);

}  // namespace immf::bench
