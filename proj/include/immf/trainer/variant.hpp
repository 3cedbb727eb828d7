#pragma once

#include <string>
#include <vector>

#include "immf/common/scale.hpp"
#include "immf/encoders/image_encoder.hpp"
#include "immf/encoders/point_encoder.hpp"
#include "immf/fusion/decoder.hpp"
#include "immf/fusion/mmm.hpp"
#include "immf/fusion/transformer.hpp"

namespace immf::trainer {

enum class Architecture {
  token_fusion_transformer,  // ImmFusion and its single-stream relatives
  deep_fusion,               // cross-attention + pose-parameter regression
  token_fusion_baseline,     // two streams with learned token substitution
};

enum class GlobalFusion { gim, mean, image_only, points_only };

enum class Decoration { none, rgb, image_feature };

/// Everything that distinguishes one model from another.
struct ModelSpec {
  std::string name;
  Architecture arch = Architecture::token_fusion_transformer;
  bool image_stream = true;   // image tokens and G_im feed the fusion
  bool point_stream = true;   // point tokens and G_pc feed the fusion
  bool local_tokens = true;   // local token sets enter the transformer
  GlobalFusion global = GlobalFusion::gim;
  Decoration decoration = Decoration::none;
  bool mmm = true;
  fusion::MmmConfig mmm_config;

  ScaleConfig scale = ScaleConfig::desk();
  fusion::FtmConfig ftm;
  fusion::DecoderConfig decoder;

  encoders::PointEncoderConfig point_encoder() const;
  encoders::ImageEncoderConfig image_encoder() const;
  /// True when the image encoder has to run (as a stream or as a decoration source).
  bool needs_image_encoder() const;
};

/// immfusion, images-only, points-only, points-rgb, points-image-feature,
/// deepfusion, tokenfusion, immfusion-wo-lf, immfusion-wo-mmm, immfusion-wo-gim.
const std::vector<std::string>& variant_names();

/// Throws ValidationError for an unknown name.
ModelSpec build_variant(const std::string& name, const ScaleConfig& scale = ScaleConfig::desk());

}  // namespace immf::trainer
