#pragma once

#include <string>
#include <vector>

#include "immf/bodysim/geometry.hpp"
#include "immf/common/rng.hpp"

namespace immf::bodysim {

/// Scene corruption applied on top of the clean sensor models.
struct CorruptionProfile {
  std::string name = "lab";
  double image_brightness_scale = 1.0;
  double image_contrast_scale = 1.0;  // around 0.5
  double image_noise_sigma = 0.0;
  int image_blur_radius = 0;
  int rain_streaks = 0;
  double occluder_fraction = 0.0;     // width of the occluding band, fraction of the image
  double occluder_value = 0.5;
  double occluder_point_drop = 0.0;   // chance a point behind the occluder is lost
  double point_noise_sigma = 0.0;     // meters
  double segment_dropout_prob = 0.0;  // per body segment
  double outlier_fraction = 0.0;
  Vec3 outlier_box_min{-1.0, -0.125, -1.0};
  Vec3 outlier_box_max{1.0, 1.875, 1.0};

  /// Throws ValidationError when a fraction leaves [0,1] or a sigma is negative.
  void validate() const;

  static CorruptionProfile lab();
  static CorruptionProfile rain();
  static CorruptionProfile smoke();
  static CorruptionProfile poor_lighting();
  static CorruptionProfile occlusion();
  static CorruptionProfile by_name(const std::string& name);
};

/// "lab", "rain", "smoke", "poor_lighting", "occlusion".
const std::vector<std::string>& scene_names();

/// Intrinsic radar behaviour, present in every scene.
struct RadarSensor {
  std::size_t returns = 192;  // surface returns before padding to 1024
  double noise_sigma = 0.06;
  double multipath_fraction = 0.06;

  static RadarSensor ideal() { return {192, 0.0, 0.0}; }
};

/// Orthographic capture window shared by the camera and the radar crop.
struct CaptureWindow {
  double center_x = 0.0;
  double center_y = 0.875;
  double extent = 2.0;

  /// Continuous pixel coordinates (column, row) of world (x, y) in an n x n image.
  double column(double x, std::size_t n) const {
    return (x - (center_x - 0.5 * extent)) / extent * static_cast<double>(n);
  }
  double row(double y, std::size_t n) const {
    return ((center_y + 0.5 * extent) - y) / extent * static_cast<double>(n);
  }
};

/// Vertical occluding band, columns [col_begin, col_end). Empty when unused.
struct Occluder {
  std::size_t col_begin = 0;
  std::size_t col_end = 0;
  bool empty() const { return col_end <= col_begin; }
};

Occluder draw_occluder(const CorruptionProfile& profile, Rng& rng, std::size_t image_size);

}  // namespace immf::bodysim
