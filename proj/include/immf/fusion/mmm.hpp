#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "immf/common/rng.hpp"
#include "immf/tensor/tensor.hpp"

namespace immf::fusion {

using tensor::Tensor;

enum class Modality { none, image, points };

std::string to_string(Modality m);

struct MmmConfig {
  double p_mod = 0.3;
  double max_token_fraction = 0.3;
};

/// token_mask covers the image tokens followed by the point tokens and marks
/// only tokens removed by partial token masking; a whole masked modality is
/// reported through modality_masked.
struct MaskDecision {
  Modality modality_masked = Modality::none;
  std::vector<bool> token_mask;

  double token_fraction() const;
  static MaskDecision none(std::size_t n_image, std::size_t n_points);
  static MaskDecision force(Modality m, std::size_t n_image, std::size_t n_points);
};

/// Which modalities a model carries and how many local tokens each contributes
/// (a model without local tokens still has both global vectors).
struct MaskLayout {
  bool image = true;
  bool points = true;
  std::size_t image_tokens = 0;
  std::size_t point_tokens = 0;
};

/// Training: when both modalities are present, with probability p_mod one of
/// them (chosen uniformly) is masked; independently a fraction drawn uniformly
/// from [0, max_token_fraction] of the remaining local tokens is masked. Evaluation: nothing is masked and
/// no randomness is consumed.
MaskDecision draw_mask(Rng& rng, const MmmConfig& cfg, bool training, const MaskLayout& layout);

template <typename T>
struct LocalTokens {
  Tensor<T> image_local;   // [49, D + 3] or undefined
  Tensor<T> image_global;  // [1, D] or undefined
  Tensor<T> point_local;   // [32, 3 + D] or undefined
  Tensor<T> point_global;  // [1, D] or undefined
};

/// Masked rows and masked global vectors become exact zeros.
template <typename T>
LocalTokens<T> apply_mask(const LocalTokens<T>& tokens, const MaskDecision& decision);

template <typename T>
LocalTokens<T> apply_mmm(const LocalTokens<T>& tokens, Rng& rng, const MmmConfig& cfg,
                         bool training, MaskDecision* decision_out = nullptr) {
  MaskLayout layout;
  layout.image = tokens.image_global.defined();
  layout.points = tokens.point_global.defined();
  layout.image_tokens = tokens.image_local.defined() ? tokens.image_local.dim(0) : 0;
  layout.point_tokens = tokens.point_local.defined() ? tokens.point_local.dim(0) : 0;
  const auto d = draw_mask(rng, cfg, training, layout);
  if (decision_out) *decision_out = d;
  return apply_mask(tokens, d);
}

}  // namespace immf::fusion
