#include "immf/trainer/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "immf/common/error.hpp"
#include "immf/common/io.hpp"
#include "immf/tensor/checkpoint.hpp"

namespace immf::trainer {

using namespace immf::tensor;

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"
constexpr std::uint64_t kMaskStream = 0x6d61736b;     // "mask"

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kShuffleStream, epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

void check_gradients(const ParamSet<float>& params) {
  for (const auto& [name, t] : params)
    for (float g : t.grad())
      if (!std::isfinite(g)) throw NonFiniteError("backward", "gradient of parameter '" + name + "'");
}

std::vector<std::string> read_curve_rows(const std::filesystem::path& path, std::size_t max_step) {
  std::vector<std::string> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) > max_step) break;
    rows.push_back(line);
  }
  return rows;
}

void write_curve(const std::filesystem::path& path, const ModelSpec& spec,
                 const std::vector<std::string>& rows) {
  std::string text = loss_curve_header(spec) + "\n";
  for (const auto& r : rows) text += r + "\n";
  io::write_file_atomic(path, text);
}

}  // namespace

std::uint64_t frame_stream_seed(std::uint64_t seed, std::size_t epoch, std::size_t frame) {
  return derive_seed(derive_seed(seed, kMaskStream, epoch), frame);
}

std::string loss_curve_header(const ModelSpec& spec) {
  std::string h = "step,total,joints,verts";
  for (std::size_t l = 0; l < spec.ftm.depth; ++l) h += ",coarse_" + std::to_string(l);
  if (spec.arch == Architecture::deep_fusion) h += ",params";
  return h;
}

std::string loss_curve_row(const StepLog& log, const ModelSpec& spec) {
  std::string r = std::to_string(log.step) + "," + fmt(log.loss.total) + "," +
                  fmt(log.loss.l1_joints) + "," + fmt(log.loss.l1_verts_full);
  for (std::size_t l = 0; l < spec.ftm.depth; ++l)
    r += "," + fmt(l < log.loss.l1_coarse_per_layer.size() ? log.loss.l1_coarse_per_layer[l] : 0.0);
  if (spec.arch == Architecture::deep_fusion) r += "," + fmt(log.loss.l1_params);
  return r;
}

TrainResult train(const Model& model, const std::vector<bodysim::Frame>& frames,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (frames.empty()) throw ValidationError("train: dataset is empty");
  const auto& spec = model.spec();
  const bool parametric = spec.arch == Architecture::deep_fusion;
  const std::size_t n = frames.size();
  const std::size_t batch = std::min(config.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  const AdamConfig adam_cfg{config.lr, 0.9, 0.999, 1e-8};

  TrainResult result;
  result.params = model.init_params(config.seed);
  std::vector<std::string> curve_rows;
  const auto ckpt_dir = options.out_dir / "checkpoint";
  const auto curve_path = options.out_dir / "loss_curve.csv";
  std::size_t start_epoch = 0;

  if (options.resume && !options.out_dir.empty() &&
      std::filesystem::exists(ckpt_dir / "manifest.json")) {
    auto ckpt = load_checkpoint(ckpt_dir);
    if (ckpt.meta.value("variant", "") != spec.name || ckpt.meta.value("seed", 0ULL) != config.seed)
      throw ValidationError("resume: checkpoint in " + ckpt_dir.string() +
                            " belongs to a different variant or seed");
    for (const auto& [name, t] : result.params)
      if (!ckpt.params.contains(name) || ckpt.params.at(name).shape() != t.shape())
        throw FormatError("resume: checkpoint does not match the model's parameters");
    result.params = std::move(ckpt.params);
    result.adam = std::move(ckpt.adam);
    start_epoch = ckpt.meta.at("epoch").get<std::size_t>();
    result.steps_completed = ckpt.meta.at("step").get<std::size_t>();
    curve_rows = read_curve_rows(curve_path, result.steps_completed);
  }
  result.epochs_completed = start_epoch;

  std::size_t run_epochs = 0;
  bool done = config.max_steps > 0 && result.steps_completed >= config.max_steps;
  for (std::size_t epoch = start_epoch; epoch < config.epochs && !done; ++epoch) {
    const auto order = epoch_order(config.seed, epoch, n);
    for (std::size_t s = 0; s < steps_per_epoch && !done; ++s) {
      result.params.zero_grad();
      const std::size_t lo = s * batch, hi = std::min(n, lo + batch);
      const double scale = 1.0 / static_cast<double>(hi - lo);
      StepLog log;
      log.epoch = epoch;
      for (std::size_t b = lo; b < hi; ++b) {
        const std::size_t idx = order[b];
        const auto& f = frames[idx];
        Rng rng(frame_stream_seed(config.seed, epoch, idx));
        ForwardOptions fo;
        fo.training = true;
        fo.rng = &rng;
        fo.mmm = &config.mmm;
        const auto out = model.forward(result.params, f.points, f.image, fo);
        const auto loss = compute_loss(out, f, model.body(), parametric);
        backward(affine_scalar(loss.total, static_cast<float>(scale)));
        log.loss.total += scale * loss.report.total;
        log.loss.l1_joints += scale * loss.report.l1_joints;
        log.loss.l1_verts_full += scale * loss.report.l1_verts_full;
        log.loss.l1_params += scale * loss.report.l1_params;
        log.loss.l1_coarse_per_layer.resize(loss.report.l1_coarse_per_layer.size());
        for (std::size_t l = 0; l < loss.report.l1_coarse_per_layer.size(); ++l)
          log.loss.l1_coarse_per_layer[l] += scale * loss.report.l1_coarse_per_layer[l];
      }
      if (!std::isfinite(log.loss.total)) throw NonFiniteError("loss", "total loss is not finite");
      check_gradients(result.params);
      adam_step(result.params, result.adam, adam_cfg);
      log.step = ++result.steps_completed;
      curve_rows.push_back(loss_curve_row(log, spec));
      if (options.on_step) options.on_step(log);
      result.curve.push_back(std::move(log));
      if (config.max_steps > 0 && result.steps_completed >= config.max_steps) done = true;
    }
    result.epochs_completed = epoch + 1;
    ++run_epochs;
    if (!options.out_dir.empty()) {
      const nlohmann::json meta = {{"variant", spec.name},
                                   {"seed", config.seed},
                                   {"epoch", result.epochs_completed},
                                   {"step", result.steps_completed},
                                   {"config", to_json(config)}};
      save_checkpoint(ckpt_dir, result.params, result.adam, meta);
      write_curve(curve_path, spec, curve_rows);
    }
    if (options.stop_after_epochs > 0 && run_epochs >= options.stop_after_epochs) break;
  }
  return result;
}

}  // namespace immf::trainer
