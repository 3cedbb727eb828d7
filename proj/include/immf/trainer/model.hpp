#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "immf/bodysim/body_template.hpp"
#include "immf/common/rng.hpp"
#include "immf/fusion/mmm.hpp"
#include "immf/trainer/variant.hpp"

namespace immf::trainer {

using tensor::ParamSet;
using tensor::Tensor;

template <typename T>
struct ModelOutput {
  Tensor<T> joints;        // [22, 3]
  Tensor<T> verts_coarse;  // [V_coarse, 3]
  Tensor<T> verts_full;    // [V_full, 3]
  std::vector<Tensor<T>> layer_preds;  // depth x [Q, 3]; empty for deepfusion
  Tensor<T> pose;          // [1, 69], deepfusion only
  Tensor<T> query_tokens;  // G_T [Q, 3 + D]
  Tensor<T> queries_out;   // G_T' [Q, hidden]
  Tensor<T> image_local;   // L_im as fed to fusion (after masking)
  Tensor<T> point_local;   // L_pc as fed to fusion (after masking)
  fusion::MaskDecision mask;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;                             // masking randomness when training
  const fusion::MaskDecision* forced_mask = nullptr;
  const fusion::MmmConfig* mmm = nullptr;         // overrides the spec's settings
  tensor::AttentionTrace* trace = nullptr;
};

class Model {
 public:
  Model(ModelSpec spec, std::shared_ptr<const bodysim::BodyTemplate> body);

  const ModelSpec& spec() const { return spec_; }
  const bodysim::BodyTemplate& body() const { return *body_; }

  /// Fresh parameters; a pure function of (spec, seed).
  ParamSet<float> init_params(std::uint64_t seed) const;

  /// points: 1024 x 3, image: 3 x H x H.
  template <typename T>
  ModelOutput<T> forward(const ParamSet<T>& ps, std::span<const float> points,
                         std::span<const float> image, const ForwardOptions& opts = {}) const;

  /// Layout the masking module sees for this model.
  fusion::MaskLayout mask_layout() const;

 private:
  template <typename T>
  ModelOutput<T> forward_fusion(const ParamSet<T>& ps, std::span<const float> points,
                                std::span<const float> image, const ForwardOptions& opts) const;
  template <typename T>
  ModelOutput<T> forward_deepfusion(const ParamSet<T>& ps, std::span<const float> points,
                                    std::span<const float> image) const;
  template <typename T>
  ModelOutput<T> forward_tokenfusion(const ParamSet<T>& ps, std::span<const float> points,
                                     std::span<const float> image,
                                     const ForwardOptions& opts) const;
  template <typename T>
  void decode(const ParamSet<T>& ps, const std::string& prefix, const Tensor<T>& queries,
              ModelOutput<T>& out) const;

  std::vector<float> decorate_rgb(std::span<const float> points,
                                  std::span<const float> image) const;
  std::vector<std::size_t> point_cells(std::span<const float> points) const;

  ModelSpec spec_;
  std::shared_ptr<const bodysim::BodyTemplate> body_;
  std::vector<float> adjacency_;
};

}  // namespace immf::trainer
