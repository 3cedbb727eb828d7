#include "immf/bodysim/radar.hpp"

#include <algorithm>
#include <cmath>

#include "immf/common/error.hpp"

namespace immf::bodysim {

std::size_t outlier_count(const CorruptionProfile& profile, const RadarSensor& sensor) {
  const double f = std::min(1.0, profile.outlier_fraction + sensor.multipath_fraction);
  return static_cast<std::size_t>(std::floor(f * static_cast<double>(kNumPoints) + 0.5));
}

std::vector<float> sample_radar(const BodyTemplate& tpl, std::span<const float> verts,
                                const CorruptionProfile& profile, const RadarSensor& sensor,
                                const Occluder& occluder, std::size_t image_size, Rng& rng,
                                const CaptureWindow& window) {
  if (verts.size() != tpl.num_full() * 3) throw ShapeError("radar: expected V_full x 3 vertices");
  if (sensor.returns == 0) throw ValidationError("radar: sensor must produce returns");
  const auto& faces = tpl.full.faces;
  auto vert = [&](std::uint32_t i) -> Vec3 {
    return {verts[3 * i], verts[3 * i + 1], verts[3 * i + 2]};
  };

  std::vector<double> cdf(faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    total += 0.5 * norm(cross(vert(t[1]) - vert(t[0]), vert(t[2]) - vert(t[0])));
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw ValidationError("radar: degenerate mesh");

  const double sigma = std::hypot(sensor.noise_sigma, profile.point_noise_sigma);
  struct Return {
    Vec3 p;
    std::uint16_t part;
  };
  std::vector<Return> returns;
  returns.reserve(sensor.returns);
  for (std::size_t k = 0; k < sensor.returns; ++k) {
    const double u = rng.uniform() * total;
    const auto f = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                 static_cast<std::ptrdiff_t>(faces.size()) - 1));
    const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    const auto& t = faces[f];
    Vec3 p = (1.0 - r1) * vert(t[0]) + (r1 * (1.0 - r2)) * vert(t[1]) + (r1 * r2) * vert(t[2]);
    const Vec3 noise = {rng.normal(), rng.normal(), rng.normal()};
    p = p + sigma * noise;
    returns.push_back({p, tpl.full.face_part[f]});
  }

  std::vector<bool> dropped_part(tpl.capsules.size());
  for (std::size_t s = 0; s < dropped_part.size(); ++s)
    dropped_part[s] = rng.bernoulli(profile.segment_dropout_prob);

  std::vector<Vec3> kept;
  kept.reserve(returns.size());
  for (const auto& r : returns) {
    const bool shadowed = rng.bernoulli(profile.occluder_point_drop);
    if (dropped_part[r.part]) continue;
    if (!occluder.empty() && shadowed) {
      const double col = window.column(r.p[0], image_size);
      if (col >= static_cast<double>(occluder.col_begin) &&
          col < static_cast<double>(occluder.col_end))
        continue;
    }
    kept.push_back(r.p);
  }
  if (kept.empty())  // everything dropped: fall back to the raw returns
    for (const auto& r : returns) kept.push_back(r.p);

  const std::size_t n_out = outlier_count(profile, sensor);
  std::vector<Vec3> cloud;
  cloud.reserve(kNumPoints);
  for (std::size_t i = 0; cloud.size() + n_out < kNumPoints; ++i) cloud.push_back(kept[i % kept.size()]);
  for (std::size_t k = 0; k < n_out; ++k) {
    Vec3 p;
    do {
      for (int a = 0; a < 3; ++a)
        p[a] = rng.uniform(profile.outlier_box_min[a], profile.outlier_box_max[a]);
    } while (distance_to_mesh(p, verts, faces) <= kOutlierClearance);
    cloud.push_back(p);
  }
  for (std::size_t i = cloud.size() - 1; i > 0; --i) std::swap(cloud[i], cloud[rng.index(i + 1)]);

  std::vector<float> out;
  out.reserve(kNumPoints * 3);
  for (const auto& p : cloud)
    for (double v : p) out.push_back(static_cast<float>(v));
  return out;
}

}  // namespace immf::bodysim
