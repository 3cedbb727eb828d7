#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "immf/bodysim/body_template.hpp"
#include "immf/bodysim/profile.hpp"

namespace immf::bodysim {

/// Channel layout of the rendered image: depth code, shading, shading times albedo.
inline constexpr std::size_t kImageChannels = 3;

/// Clean orthographic render of the posed mesh, 3 x n x n, background 0.
/// `verts` may be empty, giving an empty scene.
std::vector<float> render_clean(const BodyTemplate& tpl, std::span<const float> verts,
                                std::size_t n, const CaptureWindow& window = {});

/// Applies the profile's image corruption in place: brightness, contrast,
/// blur, rain streaks, noise, clamp to [0,1], then the occluder band.
void corrupt_image(std::vector<float>& image, std::size_t n, const CorruptionProfile& profile,
                   const Occluder& occluder, Rng& rng);

inline std::vector<float> render_image(const BodyTemplate& tpl, std::span<const float> verts,
                                       std::size_t n, const CorruptionProfile& profile,
                                       const Occluder& occluder, Rng& rng) {
  auto img = render_clean(tpl, verts, n);
  corrupt_image(img, n, profile, occluder, rng);
  return img;
}

}  // namespace immf::bodysim
