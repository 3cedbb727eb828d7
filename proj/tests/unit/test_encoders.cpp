#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "immf/common/error.hpp"
#include "immf/common/rng.hpp"
#include "immf/common/scale.hpp"
#include "immf/encoders/image_encoder.hpp"
#include "immf/encoders/point_encoder.hpp"
#include "immf/encoders/sampling.hpp"

using namespace immf;
using namespace immf::encoders;
using namespace immf::tensor;
using TF = Tensor<float>;

namespace {

std::vector<float> line_points(std::initializer_list<float> xs) {
  std::vector<float> p;
  for (float x : xs) p.insert(p.end(), {x, 0.0f, 0.0f});
  return p;
}

std::vector<float> body_cloud(std::uint64_t seed) {
  // Two blobs at roughly human scale.
  Rng rng(seed);
  std::vector<float> p(kNumPoints * 3);
  for (std::size_t i = 0; i < kNumPoints; ++i) {
    const double cy = i % 2 ? 0.5 : 1.3;
    p[3 * i] = static_cast<float>(rng.uniform(-0.25, 0.25));
    p[3 * i + 1] = static_cast<float>(cy + rng.uniform(-0.4, 0.4));
    p[3 * i + 2] = static_cast<float>(rng.uniform(-0.15, 0.15));
  }
  return p;
}

double dist(std::span<const float> p, std::size_t a, std::size_t b) {
  double s = 0;
  for (int c = 0; c < 3; ++c) {
    const double d = static_cast<double>(p[3 * a + c]) - p[3 * b + c];
    s += d * d;
  }
  return std::sqrt(s);
}

PointEncoderConfig small_points() {
  PointEncoderConfig c;
  c.feature_dim = 16;
  c.hidden = 16;
  return c;
}

}  // namespace

TEST_CASE("fps on 1-D points picks the farthest from the centroid, then max-min") {
  const auto p = line_points({0, 1, 2, 3, 9});
  CHECK(fps(p, 4) == std::vector<std::size_t>{4, 0, 3, 1});
}

TEST_CASE("fps with k = N returns every index once") {
  Rng rng(3);
  std::vector<float> p(30 * 3);
  for (auto& v : p) v = static_cast<float>(rng.uniform(-1, 1));
  auto idx = fps(p, 30);
  std::sort(idx.begin(), idx.end());
  std::vector<std::size_t> all(30);
  std::iota(all.begin(), all.end(), 0);
  CHECK(idx == all);
  CHECK_THROWS_AS(fps(p, 31), ValidationError);
  CHECK_THROWS_AS(fps(p, 0), ValidationError);
}

TEST_CASE("fps selection is independent of input order") {
  Rng rng(5);
  std::vector<float> p(50 * 3);
  for (auto& v : p) v = static_cast<float>(std::round(rng.uniform(-3, 3)));  // many ties
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 50; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  std::vector<float> q(p.size());
  for (std::size_t i = 0; i < 50; ++i)
    for (int c = 0; c < 3; ++c) q[3 * i + c] = p[3 * perm[i] + c];
  const auto a = fps(p, 12);
  const auto b = fps(q, 12);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int c = 0; c < 3; ++c) CHECK(p[3 * a[i] + c] == q[3 * b[i] + c]);
}

TEST_CASE("ball_group examples") {
  const auto p = line_points({0.0f, 0.1f, 5.0f});
  const std::vector<std::size_t> seeds = {0, 1, 2};
  const auto g = ball_group(p, seeds, 0.3, 8);
  CHECK(g[0] == std::vector<std::size_t>{0, 1});
  CHECK(g[1] == std::vector<std::size_t>{1, 0});
  CHECK(g[2] == std::vector<std::size_t>{2});
  // Vanishing radius: only the seed.
  const auto tiny = ball_group(p, seeds, 1e-9, 8);
  for (std::size_t s = 0; s < 3; ++s) CHECK(tiny[s] == std::vector<std::size_t>{s});
}

TEST_CASE("ball_group neighbours lie within the radius, nearest first, truncated") {
  Rng rng(11);
  std::vector<float> p(400 * 3);
  for (auto& v : p) v = static_cast<float>(rng.uniform(-1, 1));
  const auto seeds = fps(p, 16);
  const auto groups = ball_group(p, seeds, 0.4, 10);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto& g = groups[s];
    REQUIRE(!g.empty());
    CHECK(g.size() <= 10);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < 400; ++i) inside += dist(p, seeds[s], i) <= 0.4;
    CHECK(g.size() == std::min<std::size_t>(inside, 10));
    for (std::size_t j = 0; j < g.size(); ++j) {
      CHECK(dist(p, seeds[s], g[j]) <= 0.4 + 1e-12);
      if (j > 0) CHECK(dist(p, seeds[s], g[j - 1]) <= dist(p, seeds[s], g[j]));
    }
  }
}

TEST_CASE("point tokens have the fixed shapes and carry seed coordinates") {
  ParamSet<float> ps;
  Rng rng(1);
  Initializer init(ps, rng);
  const auto cfg = small_points();
  init_point_encoder(init, "pe", cfg);
  const auto cloud = body_cloud(2);
  const auto tok = encode_points(ps, "pe", TF::constant({kNumPoints, 3}, cloud), cfg);
  CHECK(tok.local.shape() == Shape{kNumSeeds, 3 + cfg.feature_dim});
  CHECK(tok.global.shape() == Shape{1, cfg.feature_dim});
  const auto seeds = fps(cloud, kNumSeeds);
  for (std::size_t s = 0; s < kNumSeeds; ++s)
    for (int c = 0; c < 3; ++c)
      CHECK(tok.local.at(s * (3 + cfg.feature_dim) + c) == cloud[3 * seeds[s] + c]);
  CHECK_THROWS_AS(encode_points(ps, "pe", TF::constant({10, 3}, std::vector<float>(30)), cfg),
                  ShapeError);
}

TEST_CASE("point tokens are invariant to input order") {
  ParamSet<float> ps;
  Rng rng(1);
  Initializer init(ps, rng);
  const auto cfg = small_points();
  init_point_encoder(init, "pe", cfg);
  const auto cloud = body_cloud(4);
  std::vector<std::size_t> perm(kNumPoints);
  std::iota(perm.begin(), perm.end(), 0);
  Rng prng(9);
  for (std::size_t i = kNumPoints; i > 1; --i) std::swap(perm[i - 1], perm[prng.index(i)]);
  std::vector<float> shuffled(cloud.size());
  for (std::size_t i = 0; i < kNumPoints; ++i)
    for (int c = 0; c < 3; ++c) shuffled[3 * i + c] = cloud[3 * perm[i] + c];
  const auto a = encode_points(ps, "pe", TF::constant({kNumPoints, 3}, cloud), cfg);
  const auto b = encode_points(ps, "pe", TF::constant({kNumPoints, 3}, shuffled), cfg);
  auto close = [](std::span<const float> x, std::span<const float> y) {
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(std::abs(x[i] - y[i]) <= 1e-5 * std::max(1.0f, std::abs(x[i])));
  };
  close(a.local.data(), b.local.data());
  close(a.global.data(), b.global.data());
}

TEST_CASE("translating the cloud shifts seeds and keeps cluster features") {
  ParamSet<float> ps;
  Rng rng(1);
  Initializer init(ps, rng);
  const auto cfg = small_points();
  init_point_encoder(init, "pe", cfg);
  const auto cloud = body_cloud(6);
  auto moved = cloud;
  const float t[3] = {0.5f, -0.25f, 0.75f};  // exact in binary
  for (std::size_t i = 0; i < kNumPoints; ++i)
    for (int c = 0; c < 3; ++c) moved[3 * i + c] += t[c];
  const auto a = encode_points(ps, "pe", TF::constant({kNumPoints, 3}, cloud), cfg);
  const auto b = encode_points(ps, "pe", TF::constant({kNumPoints, 3}, moved), cfg);
  const std::size_t w = 3 + cfg.feature_dim;
  for (std::size_t s = 0; s < kNumSeeds; ++s) {
    for (int c = 0; c < 3; ++c)
      CHECK(b.local.at(s * w + c) == doctest::Approx(a.local.at(s * w + c) + t[c]).epsilon(1e-6));
    for (std::size_t c = 3; c < w; ++c)
      CHECK(b.local.at(s * w + c) == doctest::Approx(a.local.at(s * w + c)).epsilon(1e-4));
  }
}

TEST_CASE("image tokens: shapes, zero image and positional columns") {
  ImageEncoderConfig cfg{28, 8};
  CHECK(cfg.stages() == 2);
  CHECK_THROWS_AS((ImageEncoderConfig{30, 8}.stages()), ValidationError);
  ParamSet<float> ps;
  Rng rng(2);
  Initializer init(ps, rng);
  init_image_encoder(init, "ie", cfg);
  const auto tok = encode_image(ps, "ie", TF::constant({3, 28, 28}, std::vector<float>(3 * 28 * 28)), cfg);
  CHECK(tok.local.shape() == Shape{kGridTokens, 8 + 3});
  CHECK(tok.global.shape() == Shape{1, 8});
  const std::size_t w = 8 + 3;
  for (std::size_t r = 1; r < kGridTokens; ++r)
    for (std::size_t c = 0; c < 8; ++c) CHECK(tok.local.at(r * w + c) == tok.local.at(c));
  // Positional columns are the grid centers and all distinct.
  const auto pos = grid_positions();
  for (std::size_t r = 0; r < kGridTokens; ++r) {
    for (int c = 0; c < 3; ++c) CHECK(tok.local.at(r * w + 8 + c) == pos[3 * r + c]);
    CHECK(pos[3 * r + 2] == 0.0f);
    for (std::size_t s = 0; s < r; ++s)
      CHECK((pos[3 * r] != pos[3 * s] || pos[3 * r + 1] != pos[3 * s + 1]));
  }
  CHECK_THROWS_AS(encode_image(ps, "ie", TF::constant({3, 14, 14}, std::vector<float>(3 * 196)), cfg),
                  ShapeError);
}

TEST_CASE("image tokens at paper scale") {
  const auto paper = ScaleConfig::paper();
  ImageEncoderConfig cfg{paper.image_size, 16};
  ParamSet<float> ps;
  Rng rng(2);
  Initializer init(ps, rng);
  init_image_encoder(init, "ie", cfg);
  std::vector<float> img(3 * cfg.image_size * cfg.image_size, 0.5f);
  const auto tok = encode_image(ps, "ie", TF::constant({3, cfg.image_size, cfg.image_size}, img), cfg);
  CHECK(tok.local.shape() == Shape{kGridTokens, 16 + 3});
}
