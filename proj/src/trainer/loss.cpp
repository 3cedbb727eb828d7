#include "immf/trainer/loss.hpp"

#include "immf/common/error.hpp"

namespace immf::trainer {

using namespace immf::tensor;

namespace {

template <typename T>
Tensor<T> target(Shape shape, const std::vector<float>& values, const char* what) {
  if (numel(shape) != values.size())
    throw ShapeError(std::string("loss: ground-truth ") + what + " has " +
                     std::to_string(values.size()) + " values, expected " +
                     std::to_string(numel(shape)) + " (scale mismatch?)");
  return Tensor<T>::constant(std::move(shape), std::vector<T>(values.begin(), values.end()));
}

}  // namespace

template <typename T>
Loss<T> compute_loss(const ModelOutput<T>& out, const bodysim::Frame& frame,
                     const bodysim::BodyTemplate& body, bool parametric) {
  Loss<T> loss;
  if (parametric) {
    if (!out.pose.defined()) throw ValidationError("loss: parametric model produced no pose");
    loss.total = l1_loss(out.pose, target<T>({1, kPoseDim}, frame.pose, "pose"));
    loss.report.l1_params = loss.total.item();
    loss.report.total = loss.report.l1_params;
    return loss;
  }

  const auto gt_joints = target<T>({kNumJoints, 3}, frame.joints, "joints");
  const auto gt_verts = target<T>({body.num_full(), 3}, frame.verts_full, "vertices");
  const auto gt_coarse = target<T>({body.num_coarse(), 3}, frame.verts_coarse, "coarse vertices");
  if (out.joints.shape() != gt_joints.shape() || out.verts_full.shape() != gt_verts.shape())
    throw ShapeError("loss: prediction shapes do not match the template scale");

  const auto lj = l1_loss(out.joints, gt_joints);
  const auto lv = l1_loss(out.verts_full, gt_verts);
  Tensor<T> total = add(lj, lv);
  loss.report.l1_joints = lj.item();
  loss.report.l1_verts_full = lv.item();
  const auto gt_tokens = concat<T>({gt_joints, gt_coarse}, 0);
  for (const auto& pred : out.layer_preds) {
    const auto lc = l1_loss(pred, gt_tokens);
    loss.report.l1_coarse_per_layer.push_back(lc.item());
    total = add(total, lc);
  }
  loss.total = total;
  loss.report.total = loss.report.l1_joints + loss.report.l1_verts_full;
  for (double c : loss.report.l1_coarse_per_layer) loss.report.total += c;
  return loss;
}

template Loss<float> compute_loss(const ModelOutput<float>&, const bodysim::Frame&,
                                  const bodysim::BodyTemplate&, bool);
template Loss<double> compute_loss(const ModelOutput<double>&, const bodysim::Frame&,
                                   const bodysim::BodyTemplate&, bool);

}  // namespace immf::trainer
