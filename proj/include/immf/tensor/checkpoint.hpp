#pragma once

#include <filesystem>

#include "json.hpp"
#include "immf/tensor/adam.hpp"
#include "immf/tensor/nn.hpp"

namespace immf::tensor {

struct Checkpoint {
  ParamSet<float> params;
  AdamState adam;
  nlohmann::json meta;
};

/// Writes `dir/manifest.json` plus one little-endian float32 blob. The blob is
/// written under a fresh name and the manifest is swapped in by rename, so a
/// reader sees either the old or the new checkpoint, never a mix.
void save_checkpoint(const std::filesystem::path& dir, const ParamSet<float>& params,
                     const AdamState& adam, const nlohmann::json& meta = nlohmann::json::object());

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace immf::tensor
