#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "immf/bench/metrics.hpp"
#include "immf/bodysim/body_template.hpp"

namespace immf::bench {

struct ExperimentMatrix {
  std::vector<std::string> variants;
  std::vector<std::string> scenes;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricsRow> rows;  // variant-major, then scene, then seed

  /// Throws ValidationError unless there is exactly one row per (variant, scene, seed).
  void validate_complete() const;
};

/// variant,scene,seed,frames,mean_joint_cm,max_joint_cm,mean_vertex_cm,max_vertex_cm
std::string matrix_csv_header();
std::string matrix_csv(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_matrix_csv(const std::string& text);

/// Seed-averaged tables (mean error, then max error) with scenes split into
/// basic and adverse groups and ablation rows after the comparison methods.
std::string format_report(const ExperimentMatrix& m);

/// Writes matrix.csv and report.txt into dir.
void emit_report(const ExperimentMatrix& m, const std::filesystem::path& dir);

/// "v x y z" lines then 1-based "f i j k" lines.
void export_mesh(const std::filesystem::path& path, std::span<const float> verts,
                 std::span<const bodysim::Face> faces);
struct Mesh {
  std::vector<float> verts;
  std::vector<bodysim::Face> faces;
};
Mesh import_mesh(const std::filesystem::path& path);

}  // namespace immf::bench
