#include "immf/bodysim/body_template.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "immf/common/error.hpp"

namespace immf::bodysim {

namespace {

constexpr std::size_t kMinCapsuleVerts = 6;

// SMPL-X body joint order.
constexpr std::array<int, kNumJoints> kParents = {-1, 0, 0, 0, 1, 2,  3,  4,  5,  6,  7,
                                                   8,  9, 9, 9, 12, 13, 14, 16, 17, 18, 19};

std::array<Vec3, kNumJoints> rest_joints() {
  return {{
      {0.00, 0.95, 0.00},    // pelvis
      {0.09, 0.88, 0.00},    // left_hip
      {-0.09, 0.88, 0.00},   // right_hip
      {0.00, 1.05, 0.00},    // spine1
      {0.10, 0.50, 0.00},    // left_knee
      {-0.10, 0.50, 0.00},   // right_knee
      {0.00, 1.18, 0.00},    // spine2
      {0.10, 0.09, 0.00},    // left_ankle
      {-0.10, 0.09, 0.00},   // right_ankle
      {0.00, 1.32, 0.00},    // spine3
      {0.11, 0.02, -0.12},   // left_foot
      {-0.11, 0.02, -0.12},  // right_foot
      {0.00, 1.50, 0.00},    // neck
      {0.07, 1.42, 0.00},    // left_collar
      {-0.07, 1.42, 0.00},   // right_collar
      {0.00, 1.62, 0.00},    // head
      {0.18, 1.43, 0.00},    // left_shoulder
      {-0.18, 1.43, 0.00},   // right_shoulder
      {0.28, 1.17, 0.00},    // left_elbow
      {-0.28, 1.17, 0.00},   // right_elbow
      {0.36, 0.93, 0.00},    // left_wrist
      {-0.36, 0.93, 0.00},   // right_wrist
  }};
}

std::vector<Capsule> humanoid_capsules() {
  std::vector<Capsule> caps = {
      {"hips", {-0.12, 0.90, 0.0}, {0.12, 0.90, 0.0}, 0.10, 0.10, 0, -1, 0.35f},
      {"abdomen", {0.0, 0.96, 0.0}, {0.0, 1.20, 0.0}, 0.12, 0.125, 3, 0, 0.55f},
      {"chest", {0.0, 1.20, 0.0}, {0.0, 1.40, 0.0}, 0.14, 0.15, 9, 6, 0.70f},
      {"head", {0.0, 1.56, 0.0}, {0.0, 1.70, 0.0}, 0.085, 0.09, 15, 12, 0.95f},
  };
  auto limb = [&](const std::string& side, double sx, int shoulder, int collar, int elbow, int hip,
                  int knee, int ankle, float tint) {
    caps.push_back({side + "_upper_arm", {sx * 0.18, 1.43, 0.0}, {sx * 0.28, 1.17, 0.0}, 0.05,
                    0.045, shoulder, collar, 0.80f * tint});
    caps.push_back({side + "_forearm", {sx * 0.28, 1.17, 0.0}, {sx * 0.38, 0.86, 0.0}, 0.042,
                    0.035, elbow, shoulder, 0.90f * tint});
    caps.push_back({side + "_thigh", {sx * 0.09, 0.88, 0.0}, {sx * 0.10, 0.50, 0.0}, 0.075, 0.055,
                    hip, 0, 0.45f * tint});
    caps.push_back({side + "_shin", {sx * 0.10, 0.50, 0.0}, {sx * 0.10, 0.09, 0.0}, 0.05, 0.04,
                    knee, hip, 0.60f * tint});
    caps.push_back({side + "_foot", {sx * 0.10, 0.06, 0.0}, {sx * 0.11, 0.04, -0.14}, 0.04, 0.035,
                    ankle, knee, 0.30f * tint});
  };
  limb("left", 1.0, 16, 13, 18, 1, 4, 7, 1.0f);
  limb("right", -1.0, 17, 14, 19, 2, 5, 8, 0.75f);
  return caps;
}

double profile_length(const Capsule& c) {
  const double len = norm(c.b - c.a);
  return 0.5 * std::numbers::pi * (c.radius_a + c.radius_b) +
         std::hypot(len, c.radius_b - c.radius_a);
}

double capsule_area(const Capsule& c) {
  const double len = norm(c.b - c.a);
  return std::numbers::pi * (c.radius_a + c.radius_b) * len +
         2.0 * std::numbers::pi * (c.radius_a * c.radius_a + c.radius_b * c.radius_b);
}

// Largest-remainder split of `total` proportional to `weights`, each share >= minimum.
std::vector<std::size_t> allocate(std::size_t total, const std::vector<double>& weights,
                                  std::size_t minimum) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out(n, minimum);
  const std::size_t spare = total - minimum * n;
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = static_cast<double>(spare) * weights[i] / wsum;
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    out[i] += whole;
    used += whole;
    rema.emplace_back(exact - static_cast<double>(whole), i);
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t k = 0; used < spare; ++k, ++used) out[rema[k].second] += 1;
  return out;
}

// Point on the capsule surface profile at arc length `s` from pole a:
// returns {axial offset from a, radius}.
std::pair<double, double> profile_at(const Capsule& c, double s) {
  const double len = norm(c.b - c.a);
  const double arc_a = 0.5 * std::numbers::pi * c.radius_a;
  const double side = std::hypot(len, c.radius_b - c.radius_a);
  if (s <= arc_a) {
    const double phi = s / c.radius_a;  // 0 at the pole
    return {-c.radius_a * std::cos(phi), c.radius_a * std::sin(phi)};
  }
  s -= arc_a;
  if (s <= side) {
    const double t = s / side;
    return {t * len, c.radius_a + t * (c.radius_b - c.radius_a)};
  }
  s -= side;
  const double phi = std::min(s / c.radius_b, 0.5 * std::numbers::pi);
  return {len + c.radius_b * std::sin(phi), c.radius_b * std::cos(phi)};
}

// Helical tessellation: `count` vertices (two poles plus a spiral) give a
// closed tube for any count >= kMinCapsuleVerts.
void tessellate(const Capsule& cap, std::size_t count, std::uint16_t part, TriMesh& mesh,
                std::vector<double>& axial) {
  const std::size_t m = count - 2;
  const Vec3 axis = normalized(cap.b - cap.a);
  const Vec3 helper = std::abs(axis[1]) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
  const Vec3 e1 = normalized(cross(axis, helper));
  const Vec3 e2 = cross(axis, e1);
  const double total = profile_length(cap);
  const double circ = std::numbers::pi * (cap.radius_a + cap.radius_b);
  const auto sectors = static_cast<std::size_t>(std::clamp<double>(
      std::round(std::sqrt(static_cast<double>(m) * circ / total)), 3.0,
      static_cast<double>(m - 1)));
  const double len = norm(cap.b - cap.a);

  const auto base = static_cast<std::uint32_t>(mesh.num_verts());
  auto push = [&](const Vec3& p, double axial_offset) {
    for (double v : p) mesh.verts.push_back(static_cast<float>(v));
    mesh.vertex_part.push_back(part);
    axial.push_back(std::clamp(axial_offset / len, 0.0, 1.0));
  };
  const std::uint32_t pole_a = base;
  push(cap.a - cap.radius_a * axis, -cap.radius_a);
  for (std::size_t k = 0; k < m; ++k) {
    const double s = total * static_cast<double>(k + 1) / static_cast<double>(m + 1);
    const auto [z, r] = profile_at(cap, s);
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(sectors);
    push(cap.a + z * axis + (r * std::cos(theta)) * e1 + (r * std::sin(theta)) * e2, z);
  }
  const std::uint32_t pole_b = base + static_cast<std::uint32_t>(m) + 1;
  push(cap.b + cap.radius_b * axis, len + cap.radius_b);

  auto h = [&](std::size_t k) { return base + 1 + static_cast<std::uint32_t>(k); };
  auto face = [&](std::uint32_t i, std::uint32_t j, std::uint32_t k) {
    mesh.faces.push_back({i, j, k});
    mesh.face_part.push_back(part);
  };
  for (std::size_t k = 0; k < sectors; ++k) face(pole_a, h(k + 1), h(k));
  face(pole_a, h(0), h(sectors));
  for (std::size_t k = 0; k + sectors < m; ++k) {
    face(h(k), h(k + 1), h(k + sectors));
    if (k + sectors + 1 < m) face(h(k + 1), h(k + sectors + 1), h(k + sectors));
  }
  const std::size_t first = m - 1 - sectors;
  for (std::size_t k = first; k + 1 < m; ++k) face(pole_b, h(k), h(k + 1));
  face(pole_b, h(m - 1), h(first));
}

TriMesh build_mesh(const std::vector<Capsule>& caps, std::size_t total,
                   std::vector<double>& axial) {
  std::vector<double> areas;
  for (const auto& c : caps) areas.push_back(capsule_area(c));
  const auto counts = allocate(total, areas, kMinCapsuleVerts);
  TriMesh mesh;
  for (std::size_t i = 0; i < caps.size(); ++i)
    tessellate(caps[i], counts[i], static_cast<std::uint16_t>(i), mesh, axial);
  return mesh;
}

// For every vertex of `src`, the barycentric coordinates of its closest point
// on the same-part faces of `dst`.
std::vector<BaryRow> project_onto(const TriMesh& src, const TriMesh& dst) {
  std::vector<BaryRow> rows(src.num_verts());
  for (std::size_t i = 0; i < src.num_verts(); ++i) {
    const Vec3 p = src.vertex(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < dst.faces.size(); ++f) {
      if (dst.face_part[f] != src.vertex_part[i]) continue;
      const auto& tri = dst.faces[f];
      const auto cp = closest_point_on_triangle(p, dst.vertex(tri[0]), dst.vertex(tri[1]),
                                                dst.vertex(tri[2]));
      if (cp.distance_sq < best) {
        best = cp.distance_sq;
        rows[i].idx = tri;
        rows[i].w = {static_cast<float>(cp.bary[0]), static_cast<float>(cp.bary[1]),
                     static_cast<float>(std::max(0.0, 1.0 - cp.bary[0] - cp.bary[1]))};
      }
    }
  }
  return rows;
}

std::vector<float> apply_rows(const std::vector<BaryRow>& rows, std::span<const float> x) {
  std::vector<float> out(rows.size() * 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 3; ++k)
        acc += static_cast<double>(rows[i].w[k]) * x[3 * rows[i].idx[k] + c];
      out[3 * i + c] = static_cast<float>(acc);
    }
  return out;
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

}  // namespace

const std::array<const char*, kNumJoints>& joint_names() {
  static const std::array<const char*, kNumJoints> names = {
      "pelvis",      "left_hip",       "right_hip",      "spine1",     "left_knee",
      "right_knee",  "spine2",         "left_ankle",     "right_ankle", "spine3",
      "left_foot",   "right_foot",     "neck",           "left_collar", "right_collar",
      "head",        "left_shoulder",  "right_shoulder", "left_elbow", "right_elbow",
      "left_wrist",  "right_wrist"};
  return names;
}

std::vector<float> BodyTemplate::to_coarse(std::span<const float> verts_full) const {
  if (verts_full.size() != num_full() * 3) throw ShapeError("to_coarse: expected V_full x 3");
  return apply_rows(downsample, verts_full);
}

std::vector<float> BodyTemplate::to_full(std::span<const float> verts_coarse) const {
  if (verts_coarse.size() != num_coarse() * 3) throw ShapeError("to_full: expected V_coarse x 3");
  return apply_rows(upsample, verts_coarse);
}

std::vector<float> BodyTemplate::dense_upsample() const {
  const std::size_t vc = num_coarse();
  std::vector<float> dense(num_full() * vc, 0.0f);
  for (std::size_t i = 0; i < upsample.size(); ++i)
    for (std::size_t k = 0; k < 3; ++k) dense[i * vc + upsample[i].idx[k]] += upsample[i].w[k];
  return dense;
}

std::vector<float> BodyTemplate::normalized_adjacency() const {
  const std::size_t q = query_tokens();
  std::vector<double> a(q * q, 0.0);
  for (std::size_t i = 0; i < q; ++i) a[i * q + i] = 1.0;
  for (std::size_t j = 1; j < kNumJoints; ++j) {
    const auto p = static_cast<std::size_t>(parent[j]);
    a[j * q + p] = a[p * q + j] = 1.0;
  }
  for (const auto& [u, v] : coarse_edges) {
    const std::size_t i = kNumJoints + u, j = kNumJoints + v;
    a[i * q + j] = a[j * q + i] = 1.0;
  }
  std::vector<double> inv_sqrt_deg(q);
  for (std::size_t i = 0; i < q; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < q; ++j) deg += a[i * q + j];
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  std::vector<float> out(q * q);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j)
      out[i * q + j] = static_cast<float>(a[i * q + j] * inv_sqrt_deg[i] * inv_sqrt_deg[j]);
  return out;
}

BodyTemplate build_template(const ScaleConfig& scale) {
  BodyTemplate t;
  t.scale = scale;
  t.capsules = humanoid_capsules();
  const std::size_t min_total = kMinCapsuleVerts * t.capsules.size();
  if (scale.verts_coarse < min_total || scale.verts_full <= scale.verts_coarse) {
    throw ValidationError("invalid template config: need " + std::to_string(min_total) +
                          " <= V_coarse < V_full, got V_coarse=" +
                          std::to_string(scale.verts_coarse) +
                          ", V_full=" + std::to_string(scale.verts_full));
  }
  t.joints_rest = rest_joints();
  t.parent = kParents;

  std::vector<double> axial_full, axial_coarse;
  t.full = build_mesh(t.capsules, scale.verts_full, axial_full);
  t.coarse = build_mesh(t.capsules, scale.verts_coarse, axial_coarse);

  const std::size_t nv = t.num_full();
  t.skin_weights.assign(nv * kNumJoints, 0.0f);
  for (std::size_t i = 0; i < nv; ++i) {
    const auto& cap = t.capsules[t.full.vertex_part[i]];
    float* row = &t.skin_weights[i * kNumJoints];
    if (cap.blend < 0) {
      row[cap.driver] = 1.0f;
      continue;
    }
    const auto w = static_cast<float>(0.5 + 0.5 * smoothstep(axial_full[i] / 0.3));
    row[cap.driver] = w;
    row[cap.blend] = 1.0f - w;
  }

  t.downsample = project_onto(t.coarse, t.full);
  t.upsample = project_onto(t.full, t.coarse);

  const auto coarse_rest = t.to_coarse(t.full.verts);
  t.template_coords.clear();
  for (const auto& j : t.joints_rest)
    for (double v : j) t.template_coords.push_back(static_cast<float>(v));
  t.template_coords.insert(t.template_coords.end(), coarse_rest.begin(), coarse_rest.end());

  for (const auto& f : t.coarse.faces)
    for (int e = 0; e < 3; ++e) {
      auto u = f[e], v = f[(e + 1) % 3];
      if (u > v) std::swap(u, v);
      t.coarse_edges.emplace_back(u, v);
    }
  std::sort(t.coarse_edges.begin(), t.coarse_edges.end());
  t.coarse_edges.erase(std::unique(t.coarse_edges.begin(), t.coarse_edges.end()),
                       t.coarse_edges.end());

  const auto round_trip = t.to_full(coarse_rest);
  double worst = 0.0;
  for (std::size_t i = 0; i < nv; ++i) {
    const Vec3 d = {round_trip[3 * i] - static_cast<double>(t.full.verts[3 * i]),
                    round_trip[3 * i + 1] - static_cast<double>(t.full.verts[3 * i + 1]),
                    round_trip[3 * i + 2] - static_cast<double>(t.full.verts[3 * i + 2])};
    worst = std::max(worst, norm(d));
  }
  t.upsample_rest_error = worst;
  return t;
}

double distance_to_mesh(const Vec3& p, std::span<const float> verts, std::span<const Face> faces) {
  auto vert = [&](std::uint32_t i) -> Vec3 {
    return {verts[3 * i], verts[3 * i + 1], verts[3 * i + 2]};
  };
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : faces)
    best = std::min(best, closest_point_on_triangle(p, vert(f[0]), vert(f[1]), vert(f[2])).distance_sq);
  return std::sqrt(best);
}

}  // namespace immf::bodysim
