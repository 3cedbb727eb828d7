#pragma once

#include <span>
#include <vector>

#include "immf/bodysim/body_template.hpp"
#include "immf/bodysim/profile.hpp"

namespace immf::bodysim {

/// Outliers are placed at least this far from the body surface.
inline constexpr double kOutlierClearance = 0.05;

/// Radar cloud of exactly 1024 x 3 points:
///   area-weighted surface returns, Gaussian noise (sensor and profile sigmas
///   combined), per-segment dropout, removal behind the occluder band, padding
///   by cycling the survivors, then uniform outliers from the profile box that
///   clear the surface by kOutlierClearance. Points are shuffled at the end.
/// Noise is drawn even at sigma 0, so two calls that differ only in sigma see
/// the same surface samples.
std::vector<float> sample_radar(const BodyTemplate& tpl, std::span<const float> verts,
                                const CorruptionProfile& profile, const RadarSensor& sensor,
                                const Occluder& occluder, std::size_t image_size, Rng& rng,
                                const CaptureWindow& window = {});

/// floor((profile + sensor outlier fraction) * 1024 + 0.5)
std::size_t outlier_count(const CorruptionProfile& profile, const RadarSensor& sensor);

}  // namespace immf::bodysim
