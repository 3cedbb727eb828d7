#include "immf/bench/checks.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <memory>

#include "immf/bench/gradcheck.hpp"
#include "immf/bench/metrics.hpp"
#include "immf/common/error.hpp"
#include "immf/common/rng.hpp"
#include "immf/encoders/sampling.hpp"
#include "immf/tensor/checkpoint.hpp"
#include "immf/trainer/train.hpp"

namespace immf::bench {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

CheckResult timed(const std::string& name, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Greedy max-min selection recomputed from scratch at every step.
std::vector<std::size_t> fps_oracle(const std::vector<float>& p, std::size_t k) {
  const std::size_t n = p.size() / 3;
  auto d2 = [&](std::size_t i, const double* c) {
    double s = 0;
    for (int a = 0; a < 3; ++a) s += (p[3 * i + a] - c[a]) * (p[3 * i + a] - c[a]);
    return s;
  };
  auto better = [&](std::size_t i, double ki, std::size_t j, double kj) {
    if (ki != kj) return ki > kj;
    for (int a = 0; a < 3; ++a)
      if (p[3 * i + a] != p[3 * j + a]) return p[3 * i + a] < p[3 * j + a];
    return i < j;
  };
  double centroid[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) centroid[a] += p[3 * i + a];
  for (double& c : centroid) c /= static_cast<double>(n);

  std::vector<std::size_t> chosen;
  while (chosen.size() < k) {
    std::size_t best = n;
    double best_key = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double key;
      if (chosen.empty()) {
        key = d2(i, centroid);
      } else {
        key = std::numeric_limits<double>::infinity();
        for (std::size_t j : chosen) {
          const double c[3] = {p[3 * j], p[3 * j + 1], p[3 * j + 2]};
          key = std::min(key, d2(i, c));
        }
      }
      if (best == n || better(i, key, best, best_key)) {
        best = i;
        best_key = key;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Every regular file under a and b matches byte for byte (names included).
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) {
    why = "file lists differ";
    return false;
  }
  for (const auto& f : fa)
    if (file_bytes(a / f) != file_bytes(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  return true;
}

fs::path scratch_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("immf_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

template <typename T>
bool bitwise_equal(const tensor::Tensor<T>& a, const tensor::Tensor<T>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

}  // namespace

CheckResult check_gradients() {
  return timed("gradients", [](CheckResult& r) {
    const auto results = run_gradient_suite();
    std::size_t failed = 0, coords = 0;
    double worst = 0;
    std::string worst_name;
    for (const auto& c : results) {
      coords += c.checked;
      if (!c.passed) ++failed;
      if (c.max_rel_error >= worst) {
        worst = c.max_rel_error;
        worst_name = c.name + " " + c.worst;
      }
    }
    r.passed = failed == 0;
    r.detail = fmt("%zu cases, %zu coordinates, %zu failed, worst rel err %.3g (%s)", results.size(),
                   coords, failed, worst, worst_name.c_str());
  });
}

CheckResult check_fps_oracle(std::size_t clouds) {
  return timed("fps", [clouds](CheckResult& r) {
    Rng rng(2024);
    std::size_t mismatches = 0;
    for (std::size_t c = 0; c < clouds; ++c) {
      const std::size_t n = 1 + rng.index(64);
      std::vector<float> p(3 * n);
      // Every third cloud lives on a coarse lattice with duplicates, so ties occur.
      const bool lattice = c % 3 == 0;
      for (auto& v : p)
        v = lattice ? static_cast<float>(rng.index(4)) * 0.25f : static_cast<float>(rng.uniform(-1, 1));
      const std::size_t k = 1 + rng.index(n);
      if (encoders::fps(p, k) != fps_oracle(p, k)) ++mismatches;
    }
    r.passed = mismatches == 0;
    r.detail = fmt("%zu clouds, %zu mismatches", clouds, mismatches);
  });
}

CheckResult check_paper_shapes() {
  return timed("shapes", [](CheckResult& r) {
    const auto scale = ScaleConfig::paper();
    auto body = std::make_shared<bodysim::BodyTemplate>(bodysim::build_template(scale));
    trainer::Model model(trainer::build_variant("immfusion", scale), body);
    const auto params = model.init_params(0);
    bodysim::GenerateOptions g;
    g.count = 1;
    g.seed = 7;
    const auto frame = bodysim::generate_frames(*body, g).at(0);
    const auto out = model.forward(params, frame.points, frame.image);
    auto s = [](const tensor::Tensor<float>& t) { return tensor::shape_str(t.shape()); };
    const bool shapes = out.query_tokens.shape() == tensor::Shape{677, 2051} &&
                        out.queries_out.shape() == tensor::Shape{677, 64} &&
                        out.point_local.shape() == tensor::Shape{32, 2051} &&
                        out.image_local.shape() == tensor::Shape{49, 2051} &&
                        out.verts_full.shape() == tensor::Shape{10475, 3};
    bool finite = true;
    for (const auto* t : {&out.joints, &out.verts_full, &out.queries_out})
      for (float v : t->data()) finite = finite && std::isfinite(v);
    r.passed = shapes && finite;
    r.detail = "query in " + s(out.query_tokens) + ", out " + s(out.queries_out) + ", points " +
               s(out.point_local) + ", image " + s(out.image_local) + ", mesh " + s(out.verts_full) +
               (finite ? ", finite" : ", NON-FINITE");
  });
}

CheckResult check_masking_invariance() {
  return timed("masking", [](CheckResult& r) {
    auto body = std::make_shared<bodysim::BodyTemplate>(bodysim::build_template(ScaleConfig::desk()));
    trainer::Model model(trainer::build_variant("immfusion"), body);
    const auto params = model.init_params(3);
    bodysim::GenerateOptions g;
    g.count = 2;
    g.seed = 11;
    const auto frames = bodysim::generate_frames(*body, g);
    const auto layout = model.mask_layout();

    auto same = [](const trainer::ModelOutput<float>& a, const trainer::ModelOutput<float>& b) {
      if (!bitwise_equal(a.joints, b.joints) || !bitwise_equal(a.verts_full, b.verts_full) ||
          !bitwise_equal(a.verts_coarse, b.verts_coarse) || !bitwise_equal(a.queries_out, b.queries_out))
        return false;
      for (std::size_t l = 0; l < a.layer_preds.size(); ++l)
        if (!bitwise_equal(a.layer_preds[l], b.layer_preds[l])) return false;
      return true;
    };
    auto run = [&](fusion::Modality m, std::span<const float> pts, std::span<const float> img) {
      const auto mask = fusion::MaskDecision::force(m, layout.image_tokens, layout.point_tokens);
      trainer::ForwardOptions o;
      o.forced_mask = &mask;
      return model.forward(params, pts, img, o);
    };
    const bool image_inv = same(run(fusion::Modality::image, frames[0].points, frames[0].image),
                                run(fusion::Modality::image, frames[0].points, frames[1].image));
    const bool points_inv = same(run(fusion::Modality::points, frames[0].points, frames[0].image),
                                 run(fusion::Modality::points, frames[1].points, frames[0].image));
    // The unmasked model must notice the change, or the check proves nothing.
    const bool sensitive = !same(run(fusion::Modality::none, frames[0].points, frames[0].image),
                                 run(fusion::Modality::none, frames[0].points, frames[1].image));
    r.passed = image_inv && points_inv && sensitive;
    r.detail = fmt("image masked: %s, points masked: %s, unmasked output changes: %s",
                   image_inv ? "identical" : "DIFFERS", points_inv ? "identical" : "DIFFERS",
                   sensitive ? "yes" : "NO");
  });
}

CheckResult check_metric_oracle(std::size_t instances) {
  return timed("metrics", [instances](CheckResult& r) {
    Rng rng(99);
    double worst = 0;
    bool ordered = true;
    for (std::size_t t = 0; t < instances; ++t) {
      const std::size_t nj = 1 + rng.index(30), nv = 1 + rng.index(500);
      auto cloud = [&](std::size_t n, double s) {
        std::vector<double> v(3 * n);
        for (auto& x : v) x = rng.uniform(-s, s);
        return v;
      };
      const auto pj = cloud(nj, 1), gj = cloud(nj, 1), pv = cloud(nv, 0.5), gv = cloud(nv, 0.5);
      const auto e = frame_errors(pj, pv, gj, gv);
      // Scalar loop oracle.
      auto oracle = [](const std::vector<double>& a, const std::vector<double>& b, double& mean,
                       double& max) {
        const std::size_t n = a.size() / 3;
        long double acc = 0;
        max = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = std::hypot(a[3 * i] - b[3 * i], a[3 * i + 1] - b[3 * i + 1],
                                      a[3 * i + 2] - b[3 * i + 2]) * 100.0;
          acc += d;
          if (d > max) max = d;
        }
        mean = static_cast<double>(acc / n);
      };
      double mj, xj, mv, xv;
      oracle(pj, gj, mj, xj);
      oracle(pv, gv, mv, xv);
      for (auto [a, b] : {std::pair{e.mean_joint_cm, mj}, {e.max_joint_cm, xj}, {e.mean_vertex_cm, mv},
                          {e.max_vertex_cm, xv}})
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
      ordered = ordered && e.max_joint_cm >= e.mean_joint_cm && e.max_vertex_cm >= e.mean_vertex_cm;
    }
    r.passed = worst < 1e-9 && ordered;
    r.detail = fmt("%zu instances, worst deviation %.3g (tol 1e-9), max >= mean: %s", instances,
                   worst, ordered ? "always" : "VIOLATED");
  });
}

CheckResult check_persistence() {
  return timed("persistence", [](CheckResult& r) {
    const auto dir = scratch_dir("persist");
    auto body = std::make_shared<bodysim::BodyTemplate>(bodysim::build_template(ScaleConfig::desk()));
    bodysim::GenerateOptions g;
    g.count = 6;
    g.seed = 5;
    g.profile = bodysim::CorruptionProfile::occlusion();
    const bodysim::Dataset ds{ScaleConfig::desk(), bodysim::generate_frames(*body, g)};
    bodysim::write_dataset(ds, dir / "a");
    const auto back = bodysim::read_dataset(dir / "a");
    bodysim::write_dataset(back, dir / "b");
    std::string why;
    const bool data_ok = back.frames == ds.frames && same_tree(dir / "a", dir / "b", why);

    trainer::Model model(trainer::build_variant("immfusion"), body);
    trainer::TrainConfig tc;
    tc.epochs = 1;
    const auto res = trainer::train(model, ds.frames, tc);
    const nlohmann::json meta = {{"variant", "immfusion"}};
    tensor::save_checkpoint(dir / "c1", res.params, res.adam, meta);
    const auto ck = tensor::load_checkpoint(dir / "c1");
    tensor::save_checkpoint(dir / "c2", ck.params, ck.adam, ck.meta);
    std::string why2;
    const bool ckpt_ok = ck.params.same_values(res.params) && ck.adam.step == res.adam.step &&
                         ck.adam.m == res.adam.m && ck.adam.v == res.adam.v &&
                         same_tree(dir / "c1", dir / "c2", why2);
    fs::remove_all(dir);
    r.passed = data_ok && ckpt_ok;
    r.detail = std::string("dataset ") + (data_ok ? "bitwise" : "MISMATCH " + why) + ", checkpoint " +
               (ckpt_ok ? "bitwise" : "MISMATCH " + why2);
  });
}

CheckResult check_overfit() {
  return timed("overfit", [](CheckResult& r) {
    auto body = std::make_shared<bodysim::BodyTemplate>(bodysim::build_template(ScaleConfig::desk()));
    bodysim::GenerateOptions g;
    g.count = 8;
    g.seed = 7;
    const auto frames = bodysim::generate_frames(*body, g);
    trainer::Model model(trainer::build_variant("immfusion"), body);
    trainer::TrainConfig tc;
    tc.lr = 1e-3;
    tc.max_steps = 300;
    tc.epochs = 300;
    const auto res = trainer::train(model, frames, tc);
    const auto row = aggregate("immfusion", "lab", 0, evaluate(model, res.params, frames));
    const double first = res.curve.front().loss.total, last = res.curve.back().loss.total;
    r.passed = res.steps_completed == 300 && row.mean_joint_cm < 2.0;
    r.detail = fmt("%zu steps, training mean joint error %.3f cm (limit 2), loss %.4f -> %.4f (%.1f%%)",
                   res.steps_completed, row.mean_joint_cm, first, last, 100.0 * last / first);
  });
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"gradients", "fps",         "shapes", "masking",
                                                  "metrics",   "persistence", "overfit"};
  return names;
}

std::vector<CheckResult> run_suite(const std::string& name) {
  if (name == "all") {
    std::vector<CheckResult> out;
    for (const auto& n : suite_names()) out.push_back(run_suite(n).at(0));
    return out;
  }
  if (name == "gradients") return {check_gradients()};
  if (name == "fps") return {check_fps_oracle()};
  if (name == "shapes") return {check_paper_shapes()};
  if (name == "masking") return {check_masking_invariance()};
  if (name == "metrics") return {check_metric_oracle()};
  if (name == "persistence") return {check_persistence()};
  if (name == "overfit") return {check_overfit()};
  throw ValidationError("unknown suite '" + name + "'");
}

}  // namespace immf::bench
