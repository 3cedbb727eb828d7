#include "immf/tensor/checkpoint.hpp"

#include <cstring>

#include "immf/common/error.hpp"
#include "immf/common/io.hpp"

namespace immf::tensor {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "immf-checkpoint";
constexpr int kVersion = 1;

void append(std::vector<float>& blob, json& entries, const std::string& name,
            const std::string& role, const Shape& shape, std::span<const float> values) {
  entries.push_back({{"name", name},
                     {"role", role},
                     {"shape", shape},
                     {"dtype", "float32"},
                     {"offset", blob.size() * sizeof(float)},
                     {"count", values.size()}});
  blob.insert(blob.end(), values.begin(), values.end());
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ParamSet<float>& params, const AdamState& adam,
                     const json& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<float> blob;
  json entries = json::array();
  for (const auto& [name, t] : params) append(blob, entries, name, "param", t.shape(), t.data());
  for (const auto& [name, t] : params) {
    auto m = adam.m.find(name);
    auto v = adam.v.find(name);
    if (m != adam.m.end() && !m->second.empty())
      append(blob, entries, name, "adam.m", t.shape(), m->second);
    if (v != adam.v.end() && !v->second.empty())
      append(blob, entries, name, "adam.v", t.shape(), v->second);
  }

  const std::string blob_name = "tensors-" + std::to_string(adam.step) + ".f32";
  std::string previous;
  if (fs::exists(dir / "manifest.json")) {
    try {
      previous = io::read_json(dir / "manifest.json").value("blob", "");
    } catch (const IoError&) {
    }
  }
  io::write_f32(dir / blob_name, blob);
  json manifest = {{"format", kFormat},   {"version", kVersion},         {"blob", blob_name},
                   {"byte_order", "little"}, {"adam_step", adam.step}, {"meta", meta},
                   {"tensors", entries}};
  io::write_json(dir / "manifest.json", manifest);
  if (!previous.empty() && previous != blob_name) fs::remove(dir / previous, ec);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const json manifest = io::read_json(dir / "manifest.json");
  if (manifest.value("format", "") != kFormat)
    throw FormatError(dir.string() + ": not a checkpoint manifest");
  if (manifest.value("version", 0) != kVersion)
    throw FormatError(dir.string() + ": unsupported checkpoint version " +
                      std::to_string(manifest.value("version", 0)));

  std::size_t total = 0;
  for (const auto& e : manifest.at("tensors")) total += e.at("count").get<std::size_t>();
  const auto blob = io::read_f32(dir / manifest.at("blob").get<std::string>(), total);

  Checkpoint ck;
  ck.meta = manifest.value("meta", json::object());
  ck.adam.step = manifest.at("adam_step").get<std::uint64_t>();
  for (const auto& e : manifest.at("tensors")) {
    if (e.value("dtype", "") != "float32") throw FormatError("unsupported dtype in checkpoint");
    const auto offset = e.at("offset").get<std::size_t>() / sizeof(float);
    const auto count = e.at("count").get<std::size_t>();
    const auto shape = e.at("shape").get<Shape>();
    if (numel(shape) != count || offset + count > blob.size())
      throw FormatError("inconsistent checkpoint entry '" + e.at("name").get<std::string>() + "'");
    std::vector<float> values(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                              blob.begin() + static_cast<std::ptrdiff_t>(offset + count));
    const auto name = e.at("name").get<std::string>();
    const auto role = e.at("role").get<std::string>();
    if (role == "param") {
      ck.params.add(name, Tensor<float>::parameter(shape, std::move(values)));
    } else if (role == "adam.m") {
      ck.adam.m[name] = std::move(values);
    } else if (role == "adam.v") {
      ck.adam.v[name] = std::move(values);
    } else {
      throw FormatError("unknown checkpoint tensor role '" + role + "'");
    }
  }
  return ck;
}

}  // namespace immf::tensor
