#include "immf/trainer/variant.hpp"

#include "immf/common/error.hpp"

namespace immf::trainer {

encoders::PointEncoderConfig ModelSpec::point_encoder() const {
  encoders::PointEncoderConfig c;
  c.feature_dim = scale.feature_dim;
  switch (decoration) {
    case Decoration::none: c.decoration_dim = 0; break;
    case Decoration::rgb: c.decoration_dim = 3; break;
    case Decoration::image_feature: c.decoration_dim = scale.feature_dim; break;
  }
  return c;
}

encoders::ImageEncoderConfig ModelSpec::image_encoder() const {
  return {scale.image_size, scale.feature_dim};
}

bool ModelSpec::needs_image_encoder() const {
  return image_stream || decoration == Decoration::image_feature;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {
      "immfusion",  "images-only",     "points-only",      "points-rgb",
      "points-image-feature", "deepfusion", "tokenfusion", "immfusion-wo-lf",
      "immfusion-wo-mmm", "immfusion-wo-gim"};
  return names;
}

ModelSpec build_variant(const std::string& name, const ScaleConfig& scale) {
  ModelSpec s;
  s.name = name;
  s.scale = scale;
  if (name == "immfusion") return s;
  if (name == "immfusion-wo-lf") {
    s.local_tokens = false;
    return s;
  }
  if (name == "immfusion-wo-mmm") {
    s.mmm = false;
    return s;
  }
  if (name == "immfusion-wo-gim") {
    s.global = GlobalFusion::mean;
    return s;
  }
  // Single-stream models and the baselines train without modality masking.
  s.mmm = false;
  if (name == "images-only") {
    s.point_stream = false;
    s.global = GlobalFusion::image_only;
    return s;
  }
  if (name == "points-only" || name == "points-rgb" || name == "points-image-feature") {
    s.image_stream = false;
    s.global = GlobalFusion::points_only;
    if (name == "points-rgb") s.decoration = Decoration::rgb;
    if (name == "points-image-feature") s.decoration = Decoration::image_feature;
    return s;
  }
  if (name == "deepfusion") {
    s.arch = Architecture::deep_fusion;
    return s;
  }
  if (name == "tokenfusion") {
    s.arch = Architecture::token_fusion_baseline;
    return s;
  }
  std::string known;
  for (const auto& n : variant_names()) known += (known.empty() ? "" : ", ") + n;
  throw ValidationError("unknown variant '" + name + "' (known: " + known + ")");
}

}  // namespace immf::trainer
