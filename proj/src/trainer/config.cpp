#include "immf/trainer/config.hpp"

#include <set>

#include "immf/bodysim/profile.hpp"
#include "immf/common/error.hpp"
#include "immf/common/io.hpp"
#include "immf/common/scale.hpp"
#include "immf/trainer/variant.hpp"

namespace immf::trainer {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ValidationError(std::string("unknown key '") + key + "' in " + what);
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ValidationError("lr must be > 0");
  if (epochs == 0) throw ValidationError("epochs must be >= 1");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  if (!(mmm.p_mod >= 0 && mmm.p_mod <= 1) ||
      !(mmm.max_token_fraction >= 0 && mmm.max_token_fraction <= 1))
    throw ValidationError("mmm p_mod and max_token_fraction must lie in [0,1]");
  ScaleConfig::from_name(scale);
}

void ExperimentConfig::validate() const {
  train.validate();
  for (const auto& v : variants) build_variant(v);
  for (const auto& s : scenes) bodysim::CorruptionProfile::by_name(s);
  if (variants.empty() || scenes.empty() || seeds.empty())
    throw ValidationError("experiment needs at least one variant, scene and seed");
  if (train_frames == 0 || test_frames == 0) throw ValidationError("frame counts must be positive");
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.variants = variant_names();
  c.scenes = bodysim::scene_names();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"mmm", {{"p_mod", c.mmm.p_mod}, {"max_token_fraction", c.mmm.max_token_fraction}}},
          {"scale", c.scale},
          {"max_steps", c.max_steps}};
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown(j, {"epochs", "lr", "batch_size", "seed", "mmm", "scale", "max_steps"},
                 "train config");
  TrainConfig c;
  read(j, "epochs", c.epochs);
  read(j, "lr", c.lr);
  read(j, "batch_size", c.batch_size);
  read(j, "seed", c.seed);
  read(j, "scale", c.scale);
  read(j, "max_steps", c.max_steps);
  if (j.contains("mmm")) {
    const auto& m = j.at("mmm");
    reject_unknown(m, {"p_mod", "max_token_fraction"}, "mmm config");
    read(m, "p_mod", c.mmm.p_mod);
    read(m, "max_token_fraction", c.mmm.max_token_fraction);
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  return {{"train", to_json(c.train)},     {"variants", c.variants},
          {"scenes", c.scenes},            {"seeds", c.seeds},
          {"data_seed", c.data_seed},      {"train_frames", c.train_frames},
          {"test_frames", c.test_frames}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  reject_unknown(j, {"train", "variants", "scenes", "seeds", "data_seed", "train_frames",
                     "test_frames"},
                 "experiment config");
  ExperimentConfig c = ExperimentConfig::desk();
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  read(j, "variants", c.variants);
  read(j, "scenes", c.scenes);
  read(j, "seeds", c.seeds);
  read(j, "data_seed", c.data_seed);
  read(j, "train_frames", c.train_frames);
  read(j, "test_frames", c.test_frames);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(io::read_json(path));
}

}  // namespace immf::trainer
