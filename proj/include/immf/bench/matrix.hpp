#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "immf/bench/report.hpp"
#include "immf/trainer/config.hpp"

namespace immf::bench {

/// Frames shared by every cell of the matrix: the lab training set and one
/// test set per scene.
struct MatrixData {
  std::vector<bodysim::Frame> train;
  std::vector<std::pair<std::string, std::vector<bodysim::Frame>>> tests;
};

/// Seed of the test sets; distinct from data_seed so test poses are unseen.
std::uint64_t test_data_seed(std::uint64_t data_seed);

/// Generates one scene's frames under the standard radar sensor.
std::vector<bodysim::Frame> generate_scene(const bodysim::BodyTemplate& body, const std::string& scene,
                                           std::size_t count, std::uint64_t seed);

/// Layout: dir/train and dir/test/<scene>, each a dataset directory.
void write_matrix_data(const MatrixData& data, const ScaleConfig& scale,
                       const std::filesystem::path& dir);
/// Throws IoError (or FormatError) when a dataset is missing or does not fit the config.
MatrixData read_matrix_data(const trainer::ExperimentConfig& cfg, const std::filesystem::path& dir);
MatrixData generate_matrix_data(const trainer::ExperimentConfig& cfg, const bodysim::BodyTemplate& body);

struct MatrixOptions {
  std::filesystem::path out_dir;   // runs/<variant>/seed<k>/, meshes/, matrix.csv, report.txt
  std::filesystem::path data_dir;  // empty: out_dir/data, generated when absent
  std::function<void(const std::string&)> log;
};

/// Trains (or loads a finished checkpoint of) each (variant, seed), evaluates it
/// on every scene and aggregates per-frame errors into one row per cell.
/// Writes matrix.csv, report.txt and one mesh per (variant, scene) for the first
/// seed's first test frame, next to the ground truth.
ExperimentMatrix run_matrix(const trainer::ExperimentConfig& cfg, const MatrixOptions& opts);

}  // namespace immf::bench
