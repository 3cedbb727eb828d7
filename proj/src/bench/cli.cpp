#include "immf/bench/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <ostream>

#include "CLI11.hpp"
#include "immf/bench/checks.hpp"
#include "immf/bench/matrix.hpp"
#include "immf/common/error.hpp"
#include "immf/common/io.hpp"
#include "immf/tensor/checkpoint.hpp"
#include "immf/trainer/train.hpp"

namespace immf::bench {

namespace fs = std::filesystem;

namespace {

struct Args {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string scene = "all";
  std::string variant;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string suite = "all";
  std::size_t frames = 0;
  bool resume = false;
};

trainer::ExperimentConfig load_config(const Args& a) {
  return a.config.empty() ? trainer::ExperimentConfig::desk() : trainer::load_experiment_config(a.config);
}

std::vector<std::string> scenes_of(const Args& a, const trainer::ExperimentConfig& cfg) {
  if (a.scene == "all") return cfg.scenes;
  bodysim::CorruptionProfile::by_name(a.scene);
  return {a.scene};
}

std::shared_ptr<bodysim::BodyTemplate> body_for(const std::string& scale) {
  return std::make_shared<bodysim::BodyTemplate>(bodysim::build_template(ScaleConfig::from_name(scale)));
}

int cmd_gen(const Args& a, std::ostream& out) {
  const auto cfg = load_config(a);
  const auto body = body_for(cfg.train.scale);
  const std::uint64_t seed = a.seed_set ? a.seed : cfg.data_seed;
  const std::size_t count = a.frames ? a.frames : cfg.test_frames;
  for (const auto& scene : scenes_of(a, cfg)) {
    const fs::path dir = fs::path(a.out) / scene;
    bodysim::write_dataset({ScaleConfig::from_name(cfg.train.scale), generate_scene(*body, scene, count, seed)},
                           dir);
    out << "wrote " << count << " " << scene << " frames to " << dir.string() << "\n";
  }
  return 0;
}

int cmd_train(const Args& a, std::ostream& out) {
  const auto cfg = load_config(a);
  const auto body = body_for(cfg.train.scale);
  trainer::Model model(trainer::build_variant(a.variant, ScaleConfig::from_name(cfg.train.scale)), body);
  std::vector<bodysim::Frame> frames;
  if (!a.data.empty()) {
    if (!fs::exists(fs::path(a.data) / "manifest.json")) throw IoError("missing dataset: " + a.data);
    frames = bodysim::read_dataset(a.data).frames;
  } else {
    frames = generate_scene(*body, "lab", cfg.train_frames, cfg.data_seed);
  }
  trainer::TrainConfig tc = cfg.train;
  tc.seed = a.seed;
  trainer::TrainOptions opts;
  opts.out_dir = a.out;
  opts.resume = a.resume;
  const auto res = trainer::train(model, frames, tc, opts);
  out << a.variant << " seed " << a.seed << ": " << res.steps_completed << " steps, " << res.epochs_completed
      << " epochs";
  if (!res.curve.empty()) out << ", final loss " << res.curve.back().loss.total;
  out << "\ncheckpoint: " << (fs::path(a.out) / "checkpoint").string() << "\n";
  return 0;
}

int cmd_eval(const Args& a, std::ostream& out) {
  const auto cfg = load_config(a);
  const auto ckpt = tensor::load_checkpoint(a.checkpoint);
  const std::string variant = a.variant.empty() ? ckpt.meta.value("variant", std::string()) : a.variant;
  const std::uint64_t seed = a.seed_set ? a.seed : ckpt.meta.value("seed", std::uint64_t{0});
  const auto body = body_for(cfg.train.scale);
  trainer::Model model(trainer::build_variant(variant, ScaleConfig::from_name(cfg.train.scale)), body);
  std::vector<MetricsRow> rows;
  for (const auto& scene : scenes_of(a, cfg)) {
    std::vector<bodysim::Frame> frames;
    if (!a.data.empty()) {
      const auto dir = fs::path(a.data) / scene;
      if (!fs::exists(dir / "manifest.json")) throw IoError("missing dataset: " + dir.string());
      frames = bodysim::read_dataset(dir).frames;
    } else {
      frames = generate_scene(*body, scene, cfg.test_frames, test_data_seed(cfg.data_seed));
    }
    rows.push_back(aggregate(variant, scene, seed, evaluate(model, ckpt.params, frames)));
  }
  const auto csv = matrix_csv(rows);
  out << csv;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    io::write_file_atomic(fs::path(a.out) / "eval.csv", std::span<const char>(csv.data(), csv.size()));
  }
  return 0;
}

int cmd_matrix(const Args& a, std::ostream& out) {
  auto cfg = load_config(a);
  if (a.seed_set) cfg.seeds = {a.seed};
  if (!a.variant.empty()) cfg.variants = {a.variant};
  cfg.scenes = scenes_of(a, cfg);
  MatrixOptions opts;
  opts.out_dir = a.out.empty() ? fs::path(".") : fs::path(a.out);
  opts.data_dir = a.data;
  opts.log = [&out](const std::string& msg) { out << msg << "\n" << std::flush; };
  const auto m = run_matrix(cfg, opts);
  out << format_report(m);
  out << "wrote " << (opts.out_dir / "matrix.csv").string() << " and "
      << (opts.out_dir / "report.txt").string() << "\n";
  return 0;
}

int cmd_check(const Args& a, std::ostream& out) {
  bool ok = true;
  for (const auto& r : run_suite(a.suite)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-12s %s  %7.2fs  ", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                  r.seconds);
    out << buf << r.detail << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radar and camera fusion for human mesh recovery: data, training and benchmarks", "immf"};
  app.require_subcommand(1);
  Args a;

  auto seed_opt = [&](CLI::App* sub, const char* help) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&a](std::uint64_t s) { a.seed = s, a.seed_set = true; }, help);
  };

  auto* gen = app.add_subcommand("gen", "Generate one dataset directory per scene profile");
  gen->add_option("--config", a.config, "Experiment config (JSON)");
  seed_opt(gen, "Dataset seed (default: the config's data_seed)");
  gen->add_option("--scene", a.scene, "Scene profile or 'all'");
  gen->add_option("--frames", a.frames, "Frames per scene (default: the config's test_frames)");
  gen->add_option("--out", a.out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train one variant");
  train->add_option("--config", a.config, "Experiment config (JSON)");
  seed_opt(train, "Training seed");
  train->add_option("--variant", a.variant, "Variant name")->required();
  train->add_option("--data", a.data, "Training dataset directory (default: generate lab frames)");
  train->add_option("--out", a.out, "Run directory for checkpoint/ and loss_curve.csv")->required();
  train->add_flag("--resume", a.resume, "Continue from the checkpoint in --out");

  auto* eval = app.add_subcommand("eval", "Evaluate one checkpoint on scene profiles");
  eval->add_option("--config", a.config, "Experiment config (JSON)");
  eval->add_option("--checkpoint", a.checkpoint, "Checkpoint directory")->required();
  seed_opt(eval, "Seed recorded in the output rows (default: from the checkpoint)");
  eval->add_option("--scene", a.scene, "Scene profile or 'all'");
  eval->add_option("--variant", a.variant, "Variant (default: from the checkpoint)");
  eval->add_option("--data", a.data, "Directory with one dataset per scene (default: generate)");
  eval->add_option("--out", a.out, "Directory for eval.csv");

  auto* matrix = app.add_subcommand("matrix", "Run the variant x scene x seed grid");
  matrix->add_option("--config", a.config, "Experiment config (JSON)");
  seed_opt(matrix, "Run this seed only");
  matrix->add_option("--scene", a.scene, "Scene profile or 'all'");
  matrix->add_option("--variant", a.variant, "Run this variant only");
  matrix->add_option("--data", a.data, "Directory holding train/ and test/<scene>/");
  matrix->add_option("--out", a.out, "Output directory (default: .)");

  auto* check = app.add_subcommand("check", "Run property suites");
  check->add_option("--suite", a.suite, "Suite name or 'all'")
      ->check(CLI::IsMember([] {
        auto v = suite_names();
        v.push_back("all");
        return v;
      }()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(a, out);
    if (train->parsed()) return cmd_train(a, out);
    if (eval->parsed()) return cmd_eval(a, out);
    if (matrix->parsed()) return cmd_matrix(a, out);
    return cmd_check(a, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const NonFiniteError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace immf::bench
