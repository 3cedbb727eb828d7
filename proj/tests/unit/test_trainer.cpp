#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "immf/bodysim/dataset.hpp"
#include "immf/common/error.hpp"
#include "immf/tensor/adam.hpp"
#include "immf/tensor/ops.hpp"
#include "immf/trainer/train.hpp"

using namespace immf;
using namespace immf::trainer;
using namespace immf::tensor;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const bodysim::BodyTemplate> desk() {
  static const auto t =
      std::make_shared<const bodysim::BodyTemplate>(bodysim::build_template(ScaleConfig::desk()));
  return t;
}

std::vector<bodysim::Frame> lab_frames(std::size_t n, std::uint64_t seed = 7) {
  bodysim::GenerateOptions o;
  o.count = n;
  o.seed = seed;
  return bodysim::generate_frames(*desk(), o);
}

Tensor<double> shifted(const std::vector<float>& v, std::size_t rows, double offset) {
  std::vector<double> d(v.begin(), v.end());
  for (auto& x : d) x += offset;
  return Tensor<double>::constant({rows, 3}, std::move(d));
}

/// Output that equals the frame's ground truth plus `offset` on every coordinate.
ModelOutput<double> output_from(const bodysim::Frame& f, double offset, std::size_t depth) {
  const auto& body = *desk();
  ModelOutput<double> out;
  out.joints = shifted(f.joints, kNumJoints, offset);
  out.verts_full = shifted(f.verts_full, body.num_full(), offset);
  out.verts_coarse = shifted(f.verts_coarse, body.num_coarse(), offset);
  std::vector<float> coarse(f.joints);
  coarse.insert(coarse.end(), f.verts_coarse.begin(), f.verts_coarse.end());
  for (std::size_t l = 0; l < depth; ++l)
    out.layer_preds.push_back(shifted(coarse, body.query_tokens(), offset));
  return out;
}

double mean_abs(std::span<const double> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - static_cast<double>(b[i]));
  return s / static_cast<double>(a.size());
}

bool same_params(const ParamSet<float>& a, const ParamSet<float>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    if (!b.contains(name)) return false;
    const auto x = t.data();
    const auto y = b.at(name).data();
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) != 0)
      return false;
  }
  return true;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 2;
  c.seed = 3;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("loss of the ground truth is zero") {
  const auto frames = lab_frames(1);
  const auto loss = compute_loss(output_from(frames[0], 0.0, 3), frames[0], *desk(), false);
  CHECK(loss.report.total == 0.0);
  CHECK(loss.report.l1_joints == 0.0);
  CHECK(loss.report.l1_verts_full == 0.0);
  REQUIRE(loss.report.l1_coarse_per_layer.size() == 3);
  for (double c : loss.report.l1_coarse_per_layer) CHECK(c == 0.0);
}

TEST_CASE("a +1 cm offset gives 0.01 in every term") {
  const auto frames = lab_frames(1);
  const auto loss = compute_loss(output_from(frames[0], 0.01, 3), frames[0], *desk(), false);
  CHECK(loss.report.l1_joints == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(loss.report.l1_verts_full == doctest::Approx(0.01).epsilon(1e-9));
  for (double c : loss.report.l1_coarse_per_layer) CHECK(c == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(loss.report.total == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(loss.total.at(0) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("loss total equals independently summed terms") {
  const auto frames = lab_frames(2);
  const auto& body = *desk();
  // Prediction: frame 1's geometry, scored against frame 0.
  auto out = output_from(frames[1], 0.0, 3);
  const auto loss = compute_loss(out, frames[0], body, false);
  const auto& f = frames[0];
  std::vector<float> coarse(f.joints);
  coarse.insert(coarse.end(), f.verts_coarse.begin(), f.verts_coarse.end());
  double want = mean_abs(out.joints.data(), f.joints) + mean_abs(out.verts_full.data(), f.verts_full);
  for (const auto& p : out.layer_preds) want += mean_abs(p.data(), coarse);
  CHECK(loss.report.total > 0.0);
  CHECK(std::abs(loss.report.total - want) <= 1e-12);
  CHECK(std::abs(loss.total.at(0) - want) <= 1e-12);
  CHECK_THROWS_AS(compute_loss(output_from(frames[0], 0.0, 3), frames[0],
                               bodysim::build_template(ScaleConfig::paper()), false),
                  ShapeError);
}

TEST_CASE("adam with a zero learning rate leaves parameters unchanged") {
  ParamSet<float> ps;
  ps.add("w", Tensor<float>::parameter({3}, {1.0f, -2.0f, 0.5f}));
  AdamState st;
  for (int i = 0; i < 5; ++i) {
    ps.zero_grad();
    backward(sum(mul(ps.at("w"), ps.at("w"))));
    adam_step(ps, st, AdamConfig{0.0, 0.9, 0.999, 1e-8});
  }
  CHECK(ps.at("w").at(0) == 1.0f);
  CHECK(ps.at("w").at(1) == -2.0f);
  CHECK(ps.at("w").at(2) == 0.5f);
  TrainConfig c;
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("training is bitwise deterministic for a seed") {
  const Model model(build_variant("immfusion"), desk());
  const auto frames = lab_frames(4);
  auto cfg = tiny_config();
  cfg.epochs = 1;
  const auto a = train(model, frames, cfg);
  const auto b = train(model, frames, cfg);
  CHECK(a.steps_completed == 2);
  CHECK(same_params(a.params, b.params));
  cfg.seed = 4;
  const auto c = train(model, frames, cfg);
  CHECK(!same_params(a.params, c.params));
}

TEST_CASE("resuming from a checkpoint reproduces the unbroken run") {
  const Model model(build_variant("immfusion"), desk());
  const auto frames = lab_frames(4);
  const auto cfg = tiny_config();
  TempDir full("immf_test_full"), split("immf_test_split");
  const auto unbroken = train(model, frames, cfg, {full.path});
  TrainOptions first{split.path};
  first.stop_after_epochs = 1;
  const auto half = train(model, frames, cfg, first);
  CHECK(half.epochs_completed == 1);
  TrainOptions second{split.path};
  second.resume = true;
  const auto resumed = train(model, frames, cfg, second);
  CHECK(resumed.epochs_completed == 2);
  CHECK(resumed.steps_completed == unbroken.steps_completed);
  CHECK(same_params(unbroken.params, resumed.params));
  CHECK(slurp(full.path / "loss_curve.csv") == slurp(split.path / "loss_curve.csv"));

  // A checkpoint from another variant is refused.
  const Model other(build_variant("points-only"), desk());
  CHECK_THROWS_AS(train(other, frames, cfg, second), ValidationError);
}

TEST_CASE("loss curve header and rows") {
  const auto spec = build_variant("immfusion");
  CHECK(loss_curve_header(spec) == "step,total,joints,verts,coarse_0,coarse_1,coarse_2");
  CHECK(loss_curve_header(build_variant("deepfusion")) ==
        "step,total,joints,verts,coarse_0,coarse_1,coarse_2,params");
  StepLog log;
  log.step = 3;
  log.loss.total = 0.5;
  log.loss.l1_coarse_per_layer = {0.1, 0.2, 0.25};
  CHECK(loss_curve_row(log, spec) == "3,0.5,0,0,0.1,0.2,0.25");
}

TEST_CASE("summed epoch loss does not depend on batch order") {
  const Model model(build_variant("immfusion"), desk());
  const auto frames = lab_frames(6);
  const auto params = model.init_params(1);
  auto epoch_loss = [&](const std::vector<std::size_t>& order) {
    double total = 0;
    for (std::size_t idx : order) {
      Rng rng(frame_stream_seed(1, 0, idx));
      ForwardOptions fo;
      fo.training = true;
      fo.rng = &rng;
      const auto out = model.forward(params, frames[idx].points, frames[idx].image, fo);
      total += compute_loss(out, frames[idx], model.body(), false).report.total;
    }
    return total;
  };
  const double a = epoch_loss({0, 1, 2, 3, 4, 5});
  const double b = epoch_loss({4, 2, 5, 0, 3, 1});
  CHECK(std::abs(a - b) <= 1e-6);
}

TEST_CASE("non-finite inputs abort training") {
  const Model model(build_variant("points-only"), desk());
  auto frames = lab_frames(2);
  frames[1].points[5] = std::nanf("");
  auto cfg = tiny_config();
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(model, frames, cfg), NonFiniteError);
  CHECK_THROWS_AS(train(model, {}, cfg), ValidationError);
}

TEST_CASE("variants carry only their documented deltas") {
  const auto base = build_variant("immfusion");
  CHECK(base.image_stream);
  CHECK(base.point_stream);
  CHECK(base.local_tokens);
  CHECK(base.global == GlobalFusion::gim);
  CHECK(base.mmm);

  const auto wo_gim = build_variant("immfusion-wo-gim");
  CHECK(wo_gim.global == GlobalFusion::mean);
  CHECK(wo_gim.local_tokens);
  CHECK(wo_gim.mmm);

  const auto wo_lf = build_variant("immfusion-wo-lf");
  CHECK(!wo_lf.local_tokens);
  CHECK(wo_lf.global == GlobalFusion::gim);

  const auto wo_mmm = build_variant("immfusion-wo-mmm");
  CHECK(!wo_mmm.mmm);
  CHECK(wo_mmm.local_tokens);

  const auto points = build_variant("points-only");
  CHECK(!points.image_stream);
  CHECK(points.point_stream);
  CHECK(!points.needs_image_encoder());

  const auto images = build_variant("images-only");
  CHECK(images.image_stream);
  CHECK(!images.point_stream);

  const auto rgb = build_variant("points-rgb");
  CHECK(rgb.decoration == Decoration::rgb);
  CHECK(!rgb.image_stream);
  CHECK(rgb.point_encoder().decoration_dim == 3);

  CHECK(build_variant("deepfusion").arch == Architecture::deep_fusion);
  CHECK(build_variant("tokenfusion").arch == Architecture::token_fusion_baseline);
  CHECK(variant_names().size() == 10);
  CHECK_THROWS_AS(build_variant("immfusion-v2"), ValidationError);
}

TEST_CASE("points-only query tokens come from the point global alone") {
  const Model model(build_variant("points-only"), desk());
  const auto frames = lab_frames(1);
  const auto params = model.init_params(0);
  const auto a = model.forward(params, frames[0].points, frames[0].image);
  std::vector<float> other_image(frames[0].image.size(), 0.25f);
  const auto b = model.forward(params, frames[0].points, other_image);
  const auto x = a.joints.data(), y = b.joints.data();
  CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0);
  CHECK(!a.image_local.defined());
}

TEST_CASE("every variant runs a forward pass with the template's shapes") {
  const auto frames = lab_frames(1);
  for (const auto& name : variant_names()) {
    CAPTURE(name);
    const Model model(build_variant(name), desk());
    const auto out = model.forward(model.init_params(0), frames[0].points, frames[0].image);
    CHECK(out.joints.shape() == Shape{kNumJoints, 3});
    CHECK(out.verts_full.shape() == Shape{desk()->num_full(), 3});
    CHECK(out.verts_coarse.shape() == Shape{desk()->num_coarse(), 3});
  }
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
  auto c = ExperimentConfig::desk();
  c.train.lr = 5e-4;
  c.seeds = {4, 5};
  const auto back = experiment_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  auto j = to_json(c);
  j["learning_rate"] = 1.0;
  CHECK_THROWS_AS(experiment_config_from_json(j), ValidationError);
  auto k = to_json(c);
  k["train"]["lr"] = -1.0;
  CHECK_THROWS_AS(experiment_config_from_json(k), ValidationError);
  auto v = to_json(c);
  v["variants"] = {"nope"};
  CHECK_THROWS_AS(experiment_config_from_json(v), ValidationError);
}
