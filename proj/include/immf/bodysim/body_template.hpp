#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "immf/bodysim/geometry.hpp"
#include "immf/common/scale.hpp"

namespace immf::bodysim {

using Face = std::array<std::uint32_t, 3>;

/// Sparse barycentric row: the row's value is w[0]*x[idx[0]] + w[1]*x[idx[1]] + w[2]*x[idx[2]].
struct BaryRow {
  std::array<std::uint32_t, 3> idx{};
  std::array<float, 3> w{};
};

struct TriMesh {
  std::vector<float> verts;        // n x 3
  std::vector<Face> faces;
  std::vector<std::uint16_t> vertex_part;
  std::vector<std::uint16_t> face_part;

  std::size_t num_verts() const { return verts.size() / 3; }
  Vec3 vertex(std::size_t i) const { return {verts[3 * i], verts[3 * i + 1], verts[3 * i + 2]}; }
};

/// One body segment of the procedural humanoid.
struct Capsule {
  std::string name;
  Vec3 a;
  Vec3 b;
  double radius_a;
  double radius_b;
  int driver;  // joint whose transform moves this segment
  int blend;   // joint sharing weight near `a`, or -1
  float albedo;
};

const std::array<const char*, kNumJoints>& joint_names();

/// Rest-pose humanoid with skinning data and the coarse/full resampling operators.
struct BodyTemplate {
  ScaleConfig scale;
  std::array<Vec3, kNumJoints> joints_rest{};
  std::array<int, kNumJoints> parent{};
  std::vector<Capsule> capsules;

  TriMesh full;    // verts_full, faces
  TriMesh coarse;  // independent coarse tessellation, only used for connectivity and U_full
  std::vector<float> skin_weights;  // V_full x 22, rows convex

  std::vector<BaryRow> downsample;  // D_coarse: V_coarse rows over full vertices
  std::vector<BaryRow> upsample;    // U_full: V_full rows over coarse vertices

  std::vector<float> template_coords;  // (22 + V_coarse) x 3: joints then D_coarse * verts_full
  std::vector<std::pair<std::uint32_t, std::uint32_t>> coarse_edges;
  /// max_i |U_full D_coarse v - v| over rest vertices, meters.
  double upsample_rest_error = 0.0;

  std::size_t num_full() const { return full.num_verts(); }
  std::size_t num_coarse() const { return coarse.num_verts(); }
  std::size_t query_tokens() const { return kNumJoints + num_coarse(); }

  /// D_coarse * verts (verts is V_full x 3), accumulated in double.
  std::vector<float> to_coarse(std::span<const float> verts_full) const;
  /// U_full * verts (verts is V_coarse x 3).
  std::vector<float> to_full(std::span<const float> verts_coarse) const;
  /// Dense U_full, V_full x V_coarse, row-major.
  std::vector<float> dense_upsample() const;
  /// Symmetrically normalized adjacency with self loops over the query tokens:
  /// joint-tree edges among the first 22 tokens, coarse-mesh edges among the rest.
  std::vector<float> normalized_adjacency() const;
};

/// Throws ValidationError unless 0 < V_coarse < V_full and both counts leave at
/// least a minimal tessellation per capsule.
BodyTemplate build_template(const ScaleConfig& scale);

/// Minimum distance from p to the mesh surface (brute force over faces).
double distance_to_mesh(const Vec3& p, std::span<const float> verts, std::span<const Face> faces);

}  // namespace immf::bodysim
