#include "immf/bench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "immf/common/error.hpp"

namespace immf::bench {

namespace {

template <typename T>
void point_errors(std::span<const T> pred, std::span<const T> gt, const char* what, double& mean,
                  double& max) {
  if (pred.size() != gt.size() || pred.size() % 3 != 0 || pred.empty())
    throw ShapeError(std::string("frame_errors: ") + what + " have " + std::to_string(pred.size()) +
                     " vs " + std::to_string(gt.size()) + " values");
  const std::size_t n = pred.size() / 3;
  double sum = 0.0;
  max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(pred[3 * i]) - static_cast<double>(gt[3 * i]);
    const double dy = static_cast<double>(pred[3 * i + 1]) - static_cast<double>(gt[3 * i + 1]);
    const double dz = static_cast<double>(pred[3 * i + 2]) - static_cast<double>(gt[3 * i + 2]);
    const double d = 100.0 * std::sqrt(dx * dx + dy * dy + dz * dz);
    sum += d;
    max = std::max(max, d);
  }
  mean = sum / static_cast<double>(n);
}

template <typename T>
FrameErrors errors_impl(std::span<const T> pj, std::span<const T> pv, std::span<const T> gj,
                        std::span<const T> gv) {
  FrameErrors e;
  point_errors(pj, gj, "joints", e.mean_joint_cm, e.max_joint_cm);
  point_errors(pv, gv, "vertices", e.mean_vertex_cm, e.max_vertex_cm);
  return e;
}

}  // namespace

FrameErrors frame_errors(std::span<const float> pred_joints, std::span<const float> pred_verts,
                         std::span<const float> gt_joints, std::span<const float> gt_verts) {
  return errors_impl(pred_joints, pred_verts, gt_joints, gt_verts);
}

FrameErrors frame_errors(std::span<const double> pred_joints, std::span<const double> pred_verts,
                         std::span<const double> gt_joints, std::span<const double> gt_verts) {
  return errors_impl(pred_joints, pred_verts, gt_joints, gt_verts);
}

MetricsRow aggregate(const std::string& variant, const std::string& scene, std::uint64_t seed,
                     std::span<const FrameErrors> frames) {
  MetricsRow row{variant, scene, seed, frames.size()};
  if (frames.empty()) return row;
  // Summing in sorted order makes the row independent of frame order.
  auto column_mean = [&](double FrameErrors::*field) {
    std::vector<double> v;
    v.reserve(frames.size());
    for (const auto& f : frames) v.push_back(f.*field);
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  row.mean_joint_cm = column_mean(&FrameErrors::mean_joint_cm);
  row.max_joint_cm = column_mean(&FrameErrors::max_joint_cm);
  row.mean_vertex_cm = column_mean(&FrameErrors::mean_vertex_cm);
  row.max_vertex_cm = column_mean(&FrameErrors::max_vertex_cm);
  return row;
}

std::vector<FrameErrors> evaluate(const trainer::Model& model, const tensor::ParamSet<float>& params,
                                  const std::vector<bodysim::Frame>& frames) {
  std::vector<FrameErrors> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    const auto pred = model.forward(params, f.points, f.image);
    out.push_back(frame_errors(pred.joints.data(), pred.verts_full.data(), f.joints, f.verts_full));
  }
  return out;
}

}  // namespace immf::bench
