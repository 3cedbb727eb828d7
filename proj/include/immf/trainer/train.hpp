#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "immf/bodysim/dataset.hpp"
#include "immf/tensor/adam.hpp"
#include "immf/trainer/config.hpp"
#include "immf/trainer/loss.hpp"
#include "immf/trainer/model.hpp"

namespace immf::trainer {

struct StepLog {
  std::size_t step = 0;  // 1-based optimizer step
  std::size_t epoch = 0;
  LossReport loss;       // batch means
};

struct TrainOptions {
  /// Holds `checkpoint/` (rewritten every epoch) and `loss_curve.csv`. Empty: keep
  /// everything in memory.
  std::filesystem::path out_dir;
  /// Continue from `out_dir/checkpoint` when one exists.
  bool resume = false;
  /// Stop after this many epochs in this call (0: no limit), leaving a
  /// checkpoint to resume from.
  std::size_t stop_after_epochs = 0;
  std::function<void(const StepLog&)> on_step;
};

struct TrainResult {
  ParamSet<float> params;
  tensor::AdamState adam;
  std::vector<StepLog> curve;  // steps run by this call
  std::size_t epochs_completed = 0;
  std::size_t steps_completed = 0;
};

/// Adam on the unit-weight L1 loss. Deterministic given config.seed: the epoch
/// order comes from a stream keyed by (seed, epoch) and each frame's masking
/// draws from a stream keyed by (seed, epoch, frame index), so a resumed run
/// replays the same stream positions as an unbroken one. A non-finite value
/// anywhere aborts with NonFiniteError naming the op (or parameter gradient).
TrainResult train(const Model& model, const std::vector<bodysim::Frame>& frames,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Header: step,total,joints,verts,coarse_0..coarse_{depth-1}[,params]
std::string loss_curve_header(const ModelSpec& spec);
std::string loss_curve_row(const StepLog& log, const ModelSpec& spec);

/// Seed of the masking stream for one frame in one epoch.
std::uint64_t frame_stream_seed(std::uint64_t seed, std::size_t epoch, std::size_t frame);

}  // namespace immf::trainer
