#pragma once

#include <vector>

#include "immf/bodysim/dataset.hpp"
#include "immf/trainer/model.hpp"

namespace immf::trainer {

/// Mean absolute per-coordinate errors, meters. total is the unit-weight sum of
/// every term. Parametric models (deepfusion) are supervised on pose
/// parameters only, so their mesh terms are zero and l1_params carries the loss.
struct LossReport {
  double total = 0.0;
  double l1_joints = 0.0;
  double l1_verts_full = 0.0;
  std::vector<double> l1_coarse_per_layer;
  double l1_params = 0.0;
};

template <typename T>
struct Loss {
  Tensor<T> total;  // [1], differentiable
  LossReport report;
};

/// Per-layer coarse targets are [gt_joints; gt_verts_coarse].
template <typename T>
Loss<T> compute_loss(const ModelOutput<T>& out, const bodysim::Frame& frame,
                     const bodysim::BodyTemplate& body, bool parametric);

}  // namespace immf::trainer
