#include "immf/common/io.hpp"

#include <fstream>

#include "immf/common/error.hpp"

namespace immf::io {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::span<const char> bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_f32(const fs::path& path, std::span<const float> values) {
  write_file_atomic(path, {reinterpret_cast<const char*>(values.data()), values.size_bytes()});
}

std::vector<float> read_f32(const fs::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != count * sizeof(float)) {
    throw FormatError(path.string() + ": expected " + std::to_string(count * sizeof(float)) +
                      " bytes, found " + std::to_string(size) +
                      (size < count * sizeof(float) ? " (truncated blob)" : " (oversized blob)"));
  }
  std::vector<float> values(count);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("read failed for " + path.string());
  return values;
}

void write_json(const fs::path& path, const nlohmann::json& value) {
  const std::string text = value.dump(2) + "\n";
  write_file_atomic(path, {text.data(), text.size()});
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace immf::io
