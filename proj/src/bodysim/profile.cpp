#include "immf/bodysim/profile.hpp"

#include <cmath>

#include "immf/common/error.hpp"

namespace immf::bodysim {

namespace {

void check_fraction(const std::string& profile, const char* field, double v) {
  if (!(v >= 0.0 && v <= 1.0))
    throw ValidationError("profile '" + profile + "': " + field + " must lie in [0,1], got " +
                          std::to_string(v));
}

void check_nonneg(const std::string& profile, const char* field, double v) {
  if (!(v >= 0.0))
    throw ValidationError("profile '" + profile + "': " + field + " must be >= 0, got " +
                          std::to_string(v));
}

}  // namespace

void CorruptionProfile::validate() const {
  check_fraction(name, "image_brightness_scale", image_brightness_scale);
  check_fraction(name, "image_contrast_scale", image_contrast_scale);
  check_fraction(name, "occluder_fraction", occluder_fraction);
  check_fraction(name, "occluder_value", occluder_value);
  check_fraction(name, "occluder_point_drop", occluder_point_drop);
  check_fraction(name, "segment_dropout_prob", segment_dropout_prob);
  check_fraction(name, "outlier_fraction", outlier_fraction);
  check_nonneg(name, "image_noise_sigma", image_noise_sigma);
  check_nonneg(name, "point_noise_sigma", point_noise_sigma);
  if (image_blur_radius < 0) throw ValidationError("profile '" + name + "': negative blur radius");
  if (rain_streaks < 0) throw ValidationError("profile '" + name + "': negative streak count");
  for (int a = 0; a < 3; ++a)
    if (!(outlier_box_min[a] < outlier_box_max[a]))
      throw ValidationError("profile '" + name + "': empty outlier box");
}

CorruptionProfile CorruptionProfile::lab() { return {}; }

CorruptionProfile CorruptionProfile::rain() {
  CorruptionProfile p;
  p.name = "rain";
  p.image_noise_sigma = 0.08;
  p.rain_streaks = 8;
  return p;
}

CorruptionProfile CorruptionProfile::smoke() {
  CorruptionProfile p;
  p.name = "smoke";
  p.image_blur_radius = 2;
  p.image_contrast_scale = 0.5;
  p.segment_dropout_prob = 0.2;
  return p;
}

CorruptionProfile CorruptionProfile::poor_lighting() {
  CorruptionProfile p;
  p.name = "poor_lighting";
  p.image_brightness_scale = 0.05;
  p.image_noise_sigma = 0.02;
  return p;
}

CorruptionProfile CorruptionProfile::occlusion() {
  CorruptionProfile p;
  p.name = "occlusion";
  p.occluder_fraction = 0.35;
  p.occluder_point_drop = 0.5;
  p.outlier_fraction = 0.05;
  return p;
}

CorruptionProfile CorruptionProfile::by_name(const std::string& name) {
  if (name == "lab") return lab();
  if (name == "rain") return rain();
  if (name == "smoke") return smoke();
  if (name == "poor_lighting") return poor_lighting();
  if (name == "occlusion") return occlusion();
  throw ValidationError("unknown scene '" + name +
                        "' (expected lab, rain, smoke, poor_lighting or occlusion)");
}

const std::vector<std::string>& scene_names() {
  static const std::vector<std::string> names = {"lab", "rain", "smoke", "poor_lighting",
                                                 "occlusion"};
  return names;
}

Occluder draw_occluder(const CorruptionProfile& profile, Rng& rng, std::size_t image_size) {
  // Drawn even when unused so every profile consumes the stream identically.
  const double u = rng.uniform();
  const auto width = static_cast<std::size_t>(
      std::lround(profile.occluder_fraction * static_cast<double>(image_size)));
  if (width == 0) return {};
  const std::size_t begin =
      static_cast<std::size_t>(u * static_cast<double>(image_size - width + 1));
  return {begin, begin + width};
}

}  // namespace immf::bodysim
