#pragma once

#include <bit>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace immf::io {

static_assert(std::endian::native == std::endian::little,
              "float32 blobs are written in host order, which must be little-endian");

/// Writes to `path.tmp` and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);
void write_f32(const std::filesystem::path& path, std::span<const float> values);
/// Reads exactly `count` floats; throws FormatError on a short or oversized file.
std::vector<float> read_f32(const std::filesystem::path& path, std::size_t count);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace immf::io
