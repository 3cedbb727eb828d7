#include "immf/bodysim/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "immf/common/error.hpp"

namespace immf::bodysim {

namespace {

const Vec3 kLightDir = normalized({0.3, 0.5, -1.0});

void box_blur(std::vector<float>& img, std::size_t n, int radius) {
  std::vector<float> tmp(img.size());
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const auto sn = static_cast<std::ptrdiff_t>(n);
  auto pass = [&](const std::vector<float>& src, std::vector<float>& dst, bool horizontal) {
    for (std::size_t c = 0; c < kImageChannels; ++c)
      for (std::ptrdiff_t y = 0; y < sn; ++y)
        for (std::ptrdiff_t x = 0; x < sn; ++x) {
          double acc = 0.0;
          for (std::ptrdiff_t d = -r; d <= r; ++d) {
            const std::ptrdiff_t xx = horizontal ? std::clamp(x + d, std::ptrdiff_t{0}, sn - 1) : x;
            const std::ptrdiff_t yy = horizontal ? y : std::clamp(y + d, std::ptrdiff_t{0}, sn - 1);
            acc += src[(c * n + static_cast<std::size_t>(yy)) * n + static_cast<std::size_t>(xx)];
          }
          dst[(c * n + static_cast<std::size_t>(y)) * n + static_cast<std::size_t>(x)] =
              static_cast<float>(acc / static_cast<double>(2 * r + 1));
        }
  };
  pass(img, tmp, true);
  pass(tmp, img, false);
}

void draw_streak(std::vector<float>& img, std::size_t n, Rng& rng) {
  const double nn = static_cast<double>(n);
  const double x0 = rng.uniform(0.0, nn), y0 = rng.uniform(0.0, nn);
  const double len = rng.uniform(0.3, 0.6) * nn;
  const double slant = rng.uniform(-0.3, 0.3);
  const auto steps = static_cast<int>(std::ceil(len));
  for (int s = 0; s <= steps; ++s) {
    const double y = y0 + s;
    const double x = x0 + slant * s;
    if (x < 0 || y < 0 || x >= nn || y >= nn) continue;
    const auto px = static_cast<std::size_t>(x), py = static_cast<std::size_t>(y);
    for (std::size_t c = 0; c < kImageChannels; ++c) img[(c * n + py) * n + px] = 0.9f;
  }
}

}  // namespace

std::vector<float> render_clean(const BodyTemplate& tpl, std::span<const float> verts,
                                std::size_t n, const CaptureWindow& window) {
  if (n == 0) throw ValidationError("render: image size must be positive");
  std::vector<float> img(kImageChannels * n * n, 0.0f);
  if (verts.empty()) return img;
  if (verts.size() != tpl.num_full() * 3) throw ShapeError("render: expected V_full x 3 vertices");

  std::vector<double> depth(n * n, std::numeric_limits<double>::infinity());
  auto vert = [&](std::uint32_t i) -> Vec3 {
    return {verts[3 * i], verts[3 * i + 1], verts[3 * i + 2]};
  };
  for (std::size_t f = 0; f < tpl.full.faces.size(); ++f) {
    const auto& tri = tpl.full.faces[f];
    const Vec3 a = vert(tri[0]), b = vert(tri[1]), c = vert(tri[2]);
    const Vec3 nrm = normalized(cross(b - a, c - a));
    const double shade = 0.25 + 0.75 * std::abs(dot(nrm, kLightDir));
    const double albedo = tpl.capsules[tpl.full.face_part[f]].albedo;

    const double ax = window.column(a[0], n), ay = window.row(a[1], n);
    const double bx = window.column(b[0], n), by = window.row(b[1], n);
    const double cx = window.column(c[0], n), cy = window.row(c[1], n);
    const double area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    if (std::abs(area) < 1e-12) continue;
    const double lo_x = std::max(0.0, std::floor(std::min({ax, bx, cx})));
    const double hi_x = std::min(static_cast<double>(n) - 1, std::ceil(std::max({ax, bx, cx})));
    const double lo_y = std::max(0.0, std::floor(std::min({ay, by, cy})));
    const double hi_y = std::min(static_cast<double>(n) - 1, std::ceil(std::max({ay, by, cy})));
    for (double py = lo_y; py <= hi_y; py += 1.0)
      for (double px = lo_x; px <= hi_x; px += 1.0) {
        const double sx = px + 0.5, sy = py + 0.5;
        const double w0 = ((bx - sx) * (cy - sy) - (by - sy) * (cx - sx)) / area;
        const double w1 = ((cx - sx) * (ay - sy) - (cy - sy) * (ax - sx)) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        const double z = w0 * a[2] + w1 * b[2] + w2 * c[2];
        const auto idx = static_cast<std::size_t>(py) * n + static_cast<std::size_t>(px);
        if (z >= depth[idx]) continue;
        depth[idx] = z;
        img[idx] = static_cast<float>(std::clamp(0.5 - z, 0.0, 1.0));
        img[n * n + idx] = static_cast<float>(shade);
        img[2 * n * n + idx] = static_cast<float>(shade * albedo);
      }
  }
  return img;
}

void corrupt_image(std::vector<float>& image, std::size_t n, const CorruptionProfile& profile,
                   const Occluder& occluder, Rng& rng) {
  if (image.size() != kImageChannels * n * n) throw ShapeError("corrupt_image: bad image size");
  const double b = profile.image_brightness_scale, c = profile.image_contrast_scale;
  if (b != 1.0 || c != 1.0)
    for (auto& v : image) v = static_cast<float>(0.5 + c * (b * v - 0.5));
  if (profile.image_blur_radius > 0) box_blur(image, n, profile.image_blur_radius);
  for (int s = 0; s < profile.rain_streaks; ++s) draw_streak(image, n, rng);
  if (profile.image_noise_sigma > 0)
    for (auto& v : image) v = static_cast<float>(v + profile.image_noise_sigma * rng.normal());
  for (auto& v : image) v = std::clamp(v, 0.0f, 1.0f);
  if (!occluder.empty()) {
    const auto value = static_cast<float>(profile.occluder_value);
    for (std::size_t ch = 0; ch < kImageChannels; ++ch)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = occluder.col_begin; x < std::min(occluder.col_end, n); ++x)
          image[(ch * n + y) * n + x] = value;
  }
}

}  // namespace immf::bodysim
