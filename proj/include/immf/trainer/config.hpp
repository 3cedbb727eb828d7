#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "immf/fusion/mmm.hpp"

namespace immf::trainer {

struct TrainConfig {
  std::size_t epochs = 30;
  double lr = 1e-3;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  fusion::MmmConfig mmm;
  std::string scale = "desk";
  std::size_t max_steps = 0;  // 0: run every epoch in full

  /// Throws ValidationError on lr <= 0, epochs == 0, batch_size == 0 or a bad scale.
  void validate() const;
};

/// The experiment matrix: every variant trained once per seed on the lab
/// training set, then evaluated on every scene.
struct ExperimentConfig {
  TrainConfig train;
  std::vector<std::string> variants;
  std::vector<std::string> scenes;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::uint64_t data_seed = 7;
  std::size_t train_frames = 256;
  std::size_t test_frames = 64;

  void validate() const;
  static ExperimentConfig desk();
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace immf::trainer
