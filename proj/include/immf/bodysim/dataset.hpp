#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "immf/bodysim/body_template.hpp"
#include "immf/bodysim/profile.hpp"

namespace immf::bodysim {

inline constexpr const char* kDatasetMagic = "immf-dataset";
inline constexpr int kDatasetVersion = 1;

struct Frame {
  std::vector<float> points;        // 1024 x 3
  std::vector<float> image;         // 3 x H x H
  std::vector<float> joints;        // 22 x 3
  std::vector<float> verts_full;    // V_full x 3
  std::vector<float> verts_coarse;  // V_coarse x 3, D_coarse * verts_full
  std::vector<float> pose;          // 69 pose parameters
  std::string scene;
  std::uint64_t seed = 0;           // seed of the frame's corruption stream

  bool operator==(const Frame&) const = default;
};

struct Dataset {
  ScaleConfig scale;
  std::vector<Frame> frames;
};

struct GenerateOptions {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  CorruptionProfile profile;
  RadarSensor sensor;
  std::size_t frames_per_sequence = 8;
  double motion_amplitude = 1.0;
};

/// Frames are pure functions of (seed, frame index, profile): poses come from
/// a stream keyed by the seed only, so every scene generated with the same seed
/// shows the same bodies, and corruption comes from a per-frame stream keyed by
/// (seed, scene, index).
std::vector<Frame> generate_frames(const BodyTemplate& tpl, const GenerateOptions& opts);

/// Directory layout: manifest.json plus one little-endian float32 blob per field
/// (points, image, joints, verts, verts_coarse, pose).
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
/// Throws FormatError on a bad magic, version mismatch or truncated blob.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace immf::bodysim
