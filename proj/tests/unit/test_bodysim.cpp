#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "immf/bodysim/dataset.hpp"
#include "immf/bodysim/pose.hpp"
#include "immf/bodysim/radar.hpp"
#include "immf/bodysim/render.hpp"
#include "immf/common/error.hpp"
#include "immf/common/io.hpp"

using namespace immf;
using namespace immf::bodysim;
namespace fs = std::filesystem;

namespace {

const BodyTemplate& desk() {
  static const BodyTemplate t = build_template(ScaleConfig::desk());
  return t;
}

double mean(const std::vector<float>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_bary_rows(const std::vector<BaryRow>& rows, std::size_t cols) {
  for (const auto& r : rows) {
    double s = 0;
    for (int k = 0; k < 3; ++k) {
      CHECK(r.w[k] >= 0.0f);
      CHECK(r.idx[k] < cols);
      s += r.w[k];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

}  // namespace

TEST_CASE("template sizes at both scales") {
  const auto& d = desk();
  CHECK(d.num_full() == 430);
  CHECK(d.num_coarse() == 86);
  CHECK(d.query_tokens() == 108);
  const auto p = build_template(ScaleConfig::paper());
  CHECK(p.num_full() == 10475);
  CHECK(p.num_coarse() == 655);
  CHECK(p.query_tokens() == 677);
  CHECK_THROWS_AS(build_template({"bad", 100, 100, 56, 64}), ValidationError);
  CHECK_THROWS_AS(build_template({"bad", 100, 200, 56, 64}), ValidationError);
}

TEST_CASE("template invariants") {
  const auto& t = desk();
  check_bary_rows(t.downsample, t.num_full());
  check_bary_rows(t.upsample, t.num_coarse());
  for (std::size_t v = 0; v < t.num_full(); ++v) {
    double s = 0;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      CHECK(t.skin_weights[v * kNumJoints + j] >= 0.0f);
      s += t.skin_weights[v * kNumJoints + j];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  // Joint tree: single root, every joint reaches it without revisiting.
  CHECK(t.parent[0] == -1);
  for (std::size_t j = 1; j < kNumJoints; ++j) {
    int cur = static_cast<int>(j), hops = 0;
    while (cur != 0 && hops <= static_cast<int>(kNumJoints)) {
      REQUIRE(t.parent[cur] >= 0);
      cur = t.parent[cur];
      ++hops;
    }
    CHECK(cur == 0);
  }
  CHECK(t.template_coords.size() == 3 * t.query_tokens());
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) CHECK(t.template_coords[3 * j + a] == static_cast<float>(t.joints_rest[j][a]));
  const auto coarse = t.to_coarse(t.full.verts);
  CHECK(std::equal(coarse.begin(), coarse.end(), t.template_coords.begin() + 3 * kNumJoints));
  CHECK(t.upsample_rest_error > 0.0);
}

TEST_CASE("sample_pose") {
  Rng rng(1);
  auto zero = MotionState::zero();
  const auto rest = sample_pose(rng, zero);
  for (const auto& r : rest.joint_rot) CHECK(r == Vec3{0, 0, 0});
  CHECK(rest.root_pos == Vec3{0, 0, 0});

  Rng a(42), b(42);
  auto ma = MotionState::random(a), mb = MotionState::random(b);
  for (int i = 0; i < 20; ++i) {
    const auto pa = sample_pose(a, ma), pb = sample_pose(b, mb);
    CHECK(pa.to_params() == pb.to_params());
  }

  Rng c(7);
  auto mc = MotionState::random(c);
  std::size_t inside = 0;
  for (int i = 0; i < 1000; ++i) {
    if (i % 50 == 0) mc = MotionState::random(c);
    inside += JointLimits::defaults().contains(sample_pose(c, mc));
  }
  CHECK(inside == 1000);
}

TEST_CASE("pose parameters round-trip") {
  Rng rng(3);
  auto m = MotionState::random(rng);
  const auto p = sample_pose(rng, m);
  const auto q = Pose::from_params(p.to_params());
  CHECK(q.to_params() == p.to_params());
  CHECK(p.to_params().size() == kPoseDim);
}

TEST_CASE("skinning") {
  const auto& t = desk();
  const auto rest = skin(t, Pose{});
  CHECK(rest.verts == t.full.verts);
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) CHECK(rest.joints[3 * j + a] == static_cast<float>(t.joints_rest[j][a]));

  SUBCASE("root translation shifts everything") {
    Rng rng(5);
    auto m = MotionState::random(rng);
    Pose p = sample_pose(rng, m);
    const auto base = skin(t, p);
    const Vec3 shift{0.05, -0.02, 0.1};
    p.root_pos = p.root_pos + shift;
    const auto moved = skin(t, p);
    for (std::size_t i = 0; i < base.verts.size(); ++i)
      CHECK(moved.verts[i] == doctest::Approx(base.verts[i] + shift[i % 3]).epsilon(1e-5));
    for (std::size_t i = 0; i < base.joints.size(); ++i)
      CHECK(moved.joints[i] == doctest::Approx(base.joints[i] + shift[i % 3]).epsilon(1e-5));
  }

  SUBCASE("single joint rotation moves descendants on a circle") {
    const std::size_t shoulder = 16, elbow = 18, wrist = 20;
    Pose p;
    p.joint_rot[shoulder] = {0, 0, M_PI / 2};
    const auto s = skin(t, p);
    const auto& jr = t.joints_rest;
    for (std::size_t child : {elbow, wrist}) {
      // Closed form: Rz(90) maps (x, y, z) to (-y, x, z) about the shoulder.
      const Vec3 off = jr[child] - jr[shoulder];
      const Vec3 want = jr[shoulder] + Vec3{-off[1], off[0], off[2]};
      for (int a = 0; a < 3; ++a) CHECK(s.joints[3 * child + a] == doctest::Approx(want[a]).epsilon(1e-5));
      const Vec3 got{s.joints[3 * child], s.joints[3 * child + 1], s.joints[3 * child + 2]};
      CHECK(norm(got - jr[shoulder]) == doctest::Approx(norm(off)).epsilon(1e-5));
    }
    for (std::size_t j : {0, 1, 4, 15, 17}) CHECK(s.joints[3 * j] == static_cast<float>(jr[j][0]));
  }
}

TEST_CASE("rendering") {
  const auto& t = desk();
  const std::size_t n = 56;
  const auto empty = render_clean(t, {}, n);
  CHECK(empty.size() == 3 * n * n);
  for (float v : empty) CHECK(v == 0.0f);

  const auto clean = render_clean(t, t.full.verts, n);
  for (float v : clean) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // The body spans at least half of the crop vertically.
  std::size_t top = n, bottom = 0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (clean[n * n + r * n + c] > 0) top = std::min(top, r), bottom = std::max(bottom, r);
  CHECK(bottom - top + 1 >= n / 2);

  SUBCASE("poor lighting stays under the scaled clean mean plus the noise floor") {
    auto dark = clean;
    Rng rng(3);
    const auto prof = CorruptionProfile::poor_lighting();
    corrupt_image(dark, n, prof, Occluder{}, rng);
    // Clamped Gaussian noise adds at most E[max(0, e)] = sigma / sqrt(2 pi) on dark pixels,
    // plus a 4-sigma sampling margin on its mean.
    const double floor = prof.image_noise_sigma / std::sqrt(2 * M_PI) +
                         4 * prof.image_noise_sigma / std::sqrt(static_cast<double>(dark.size()));
    CHECK(mean(dark) <= prof.image_brightness_scale * mean(clean) + floor);
    CHECK(mean(dark) < mean(clean));
  }
  SUBCASE("occluder pixels hold the occluder value") {
    auto occ_img = clean;
    Rng rng(4);
    const auto prof = CorruptionProfile::occlusion();
    const auto occ = draw_occluder(prof, rng, n);
    REQUIRE(!occ.empty());
    CHECK(occ.col_end - occ.col_begin == static_cast<std::size_t>(std::lround(0.35 * n)));
    corrupt_image(occ_img, n, prof, occ, rng);
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = occ.col_begin; c < occ.col_end; ++c)
          CHECK(occ_img[ch * n * n + r * n + c] == static_cast<float>(prof.occluder_value));
  }
}

TEST_CASE("radar sampling") {
  const auto& t = desk();
  Rng prng(9);
  auto m = MotionState::random(prng);
  const auto body = skin(t, sample_pose(prng, m));

  SUBCASE("clean samples lie on the surface") {
    Rng rng(1);
    const auto pts = sample_radar(t, body.verts, CorruptionProfile::lab(), RadarSensor::ideal(), {}, 56, rng);
    REQUIRE(pts.size() == kNumPoints * 3);
    double worst = 0;
    for (std::size_t i = 0; i < kNumPoints; ++i)
      worst = std::max(worst, distance_to_mesh({pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]}, body.verts,
                                               t.full.faces));
    CHECK(worst <= 1e-6);
  }
  SUBCASE("outlier fraction 0.1 gives 102 points outside the 5 cm hull") {
    auto prof = CorruptionProfile::lab();
    prof.outlier_fraction = 0.1;
    CHECK(outlier_count(prof, RadarSensor::ideal()) == 102);
    Rng rng(2);
    const auto pts = sample_radar(t, body.verts, prof, RadarSensor::ideal(), {}, 56, rng);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < kNumPoints; ++i)
      outside += distance_to_mesh({pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]}, body.verts, t.full.faces) >
                 0.05;
    CHECK(outside == 102);
  }
  SUBCASE("same seed, same cloud; translation moves clean samples rigidly") {
    Rng a(3), b(3);
    const auto pa = sample_radar(t, body.verts, CorruptionProfile::lab(), RadarSensor::ideal(), {}, 56, a);
    const auto pb = sample_radar(t, body.verts, CorruptionProfile::lab(), RadarSensor::ideal(), {}, 56, b);
    CHECK(pa == pb);
    auto shifted = body.verts;
    for (std::size_t i = 0; i < shifted.size(); i += 3) shifted[i] += 0.25f;
    Rng c(3);
    // Shift the window too, so the capture crop is unchanged relative to the body.
    CaptureWindow w;
    w.center_x += 0.25;
    const auto pc = sample_radar(t, shifted, CorruptionProfile::lab(), RadarSensor::ideal(), {}, 56, c, w);
    for (std::size_t i = 0; i < pa.size(); ++i)
      CHECK(pc[i] == doctest::Approx(pa[i] + (i % 3 == 0 ? 0.25 : 0.0)).epsilon(1e-5));
  }
  SUBCASE("sensor noise has zero mean") {
    const RadarSensor noisy{kNumPoints, 0.03, 0.0};
    const RadarSensor exact{kNumPoints, 0.0, 0.0};
    Rng a(4), b(4);
    const auto pn = sample_radar(t, body.verts, CorruptionProfile::lab(), noisy, {}, 56, a);
    const auto pe = sample_radar(t, body.verts, CorruptionProfile::lab(), exact, {}, 56, b);
    const double bound = 3 * noisy.noise_sigma / std::sqrt(static_cast<double>(kNumPoints));
    for (int axis = 0; axis < 3; ++axis) {
      double s = 0;
      for (std::size_t i = 0; i < kNumPoints; ++i) s += pn[3 * i + axis] - pe[3 * i + axis];
      CHECK(std::abs(s / kNumPoints) <= bound);
    }
  }
}

TEST_CASE("generated frames") {
  const auto& t = desk();
  GenerateOptions g;
  g.count = 6;
  g.seed = 11;
  g.profile = CorruptionProfile::smoke();
  const auto a = generate_frames(t, g);
  const auto b = generate_frames(t, g);
  CHECK(a == b);
  for (const auto& f : a) {
    CHECK(f.points.size() == kNumPoints * 3);
    CHECK(f.image.size() == 3 * 56 * 56);
    CHECK(f.verts_coarse == t.to_coarse(f.verts_full));
    CHECK(f.pose.size() == kPoseDim);
    CHECK(f.scene == "smoke");
    for (float v : f.image) CHECK((v >= 0.0f && v <= 1.0f));
  }
  // Same seed across scenes: same bodies, different sensing.
  g.profile = CorruptionProfile::rain();
  const auto r = generate_frames(t, g);
  CHECK(r[0].joints == a[0].joints);
  CHECK(r[0].image != a[0].image);
}

TEST_CASE("dataset persistence") {
  const auto& t = desk();
  const auto dir = fs::temp_directory_path() / "immf_test_dataset";
  fs::remove_all(dir);

  SUBCASE("empty dataset") {
    write_dataset({ScaleConfig::desk(), {}}, dir);
    const auto back = read_dataset(dir);
    CHECK(back.frames.empty());
    CHECK(back.scale.name == "desk");
  }
  SUBCASE("16 frames bitwise; damaged files are rejected") {
    GenerateOptions g;
    g.count = 16;
    g.seed = 3;
    g.profile = CorruptionProfile::occlusion();
    const Dataset ds{ScaleConfig::desk(), generate_frames(t, g)};
    write_dataset(ds, dir);
    CHECK(read_dataset(dir).frames == ds.frames);

    auto manifest = io::read_json(dir / "manifest.json");
    auto bad = manifest;
    bad["format"] = "something-else";
    io::write_json(dir / "manifest.json", bad);
    CHECK_THROWS_AS(read_dataset(dir), FormatError);
    bad = manifest;
    bad["version"] = 99;
    io::write_json(dir / "manifest.json", bad);
    CHECK_THROWS_AS(read_dataset(dir), FormatError);
    io::write_json(dir / "manifest.json", manifest);
    fs::resize_file(dir / "points.f32", fs::file_size(dir / "points.f32") - 4);
    CHECK_THROWS_AS(read_dataset(dir), FormatError);
  }
  fs::remove_all(dir);
  CHECK_THROWS_AS(read_dataset(dir), IoError);
}
