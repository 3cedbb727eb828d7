#include "immf/bench/matrix.hpp"

#include <chrono>
#include <cstdio>
#include <memory>

#include "immf/common/error.hpp"
#include "immf/common/rng.hpp"
#include "immf/tensor/checkpoint.hpp"
#include "immf/trainer/train.hpp"

namespace immf::bench {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTestStream = 0x74657374;  // "test"

bodysim::Dataset load_checked(const fs::path& dir, const ScaleConfig& scale, std::size_t frames) {
  if (!fs::exists(dir / "manifest.json")) throw IoError("missing dataset: " + dir.string());
  auto ds = bodysim::read_dataset(dir);
  if (ds.scale.name != scale.name || ds.frames.size() != frames)
    throw FormatError("dataset " + dir.string() + " holds " + std::to_string(ds.frames.size()) + " " +
                      ds.scale.name + " frames; the config expects " + std::to_string(frames) + " " +
                      scale.name + " frames");
  return ds;
}

}  // namespace

std::uint64_t test_data_seed(std::uint64_t data_seed) { return derive_seed(data_seed, kTestStream); }

std::vector<bodysim::Frame> generate_scene(const bodysim::BodyTemplate& body, const std::string& scene,
                                           std::size_t count, std::uint64_t seed) {
  bodysim::GenerateOptions g;
  g.count = count;
  g.seed = seed;
  g.profile = bodysim::CorruptionProfile::by_name(scene);
  return bodysim::generate_frames(body, g);
}

MatrixData generate_matrix_data(const trainer::ExperimentConfig& cfg, const bodysim::BodyTemplate& body) {
  MatrixData d;
  d.train = generate_scene(body, "lab", cfg.train_frames, cfg.data_seed);
  for (const auto& s : cfg.scenes)
    d.tests.emplace_back(s, generate_scene(body, s, cfg.test_frames, test_data_seed(cfg.data_seed)));
  return d;
}

void write_matrix_data(const MatrixData& data, const ScaleConfig& scale, const fs::path& dir) {
  bodysim::write_dataset({scale, data.train}, dir / "train");
  for (const auto& [scene, frames] : data.tests)
    bodysim::write_dataset({scale, frames}, dir / "test" / scene);
}

MatrixData read_matrix_data(const trainer::ExperimentConfig& cfg, const fs::path& dir) {
  const auto scale = ScaleConfig::from_name(cfg.train.scale);
  MatrixData d;
  d.train = load_checked(dir / "train", scale, cfg.train_frames).frames;
  for (const auto& s : cfg.scenes)
    d.tests.emplace_back(s, load_checked(dir / "test" / s, scale, cfg.test_frames).frames);
  return d;
}

ExperimentMatrix run_matrix(const trainer::ExperimentConfig& cfg, const MatrixOptions& opts) {
  cfg.validate();
  auto log = [&](const std::string& msg) {
    if (opts.log) opts.log(msg);
  };
  const auto scale = ScaleConfig::from_name(cfg.train.scale);
  auto body = std::make_shared<bodysim::BodyTemplate>(bodysim::build_template(scale));

  MatrixData data;
  if (!opts.data_dir.empty()) {
    data = read_matrix_data(cfg, opts.data_dir);
  } else {
    const auto dir = opts.out_dir / "data";
    if (fs::exists(dir / "train" / "manifest.json")) {
      data = read_matrix_data(cfg, dir);
    } else {
      log("generating datasets in " + dir.string());
      data = generate_matrix_data(cfg, *body);
      write_matrix_data(data, scale, dir);
    }
  }

  ExperimentMatrix m{cfg.variants, cfg.scenes, cfg.seeds, {}};
  std::vector<std::vector<MetricsRow>> cells(cfg.variants.size() * cfg.scenes.size());
  for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi) {
    const auto& variant = cfg.variants[vi];
    trainer::Model model(trainer::build_variant(variant, scale), body);
    for (auto seed : cfg.seeds) {
      trainer::TrainConfig tc = cfg.train;
      tc.seed = seed;
      trainer::TrainOptions to;
      to.out_dir = opts.out_dir / "runs" / variant / ("seed" + std::to_string(seed));
      to.resume = false;
      const auto manifest = to.out_dir / "checkpoint" / "manifest.json";
      if (fs::exists(manifest)) {
        const auto meta = tensor::load_checkpoint(to.out_dir / "checkpoint").meta;
        to.resume = meta.contains("config") && meta.at("config") == trainer::to_json(tc);
      }
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = trainer::train(model, data.train, tc, to);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s seed %llu: %zu steps (%.1f s)", variant.c_str(),
                    static_cast<unsigned long long>(seed), result.steps_completed, secs);
      log(buf);

      for (std::size_t si = 0; si < data.tests.size(); ++si) {
        const auto& [scene, frames] = data.tests[si];
        const auto errs = evaluate(model, result.params, frames);
        cells[vi * cfg.scenes.size() + si].push_back(aggregate(variant, scene, seed, errs));
        if (seed == cfg.seeds.front() && !opts.out_dir.empty() && !frames.empty()) {
          const auto dir = opts.out_dir / "meshes" / scene;
          fs::create_directories(dir);
          const auto out = model.forward(result.params, frames[0].points, frames[0].image);
          export_mesh(dir / (variant + ".obj"), out.verts_full.data(), body->full.faces);
          export_mesh(dir / "ground_truth.obj", frames[0].verts_full, body->full.faces);
        }
      }
    }
  }
  for (auto& c : cells) m.rows.insert(m.rows.end(), c.begin(), c.end());
  m.validate_complete();
  if (!opts.out_dir.empty()) emit_report(m, opts.out_dir);
  return m;
}

}  // namespace immf::bench
