#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "doctest.h"
#include "immf/bodysim/body_template.hpp"
#include "immf/common/error.hpp"
#include "immf/common/rng.hpp"
#include "immf/fusion/decoder.hpp"
#include "immf/fusion/gim.hpp"
#include "immf/fusion/mmm.hpp"
#include "immf/fusion/transformer.hpp"
#include "immf/tensor/ops.hpp"

using namespace immf;
using namespace immf::fusion;
using namespace immf::tensor;
using TF = Tensor<float>;

namespace {

const bodysim::BodyTemplate& desk() {
  static const auto t = bodysim::build_template(ScaleConfig::desk());
  return t;
}

TF random_tensor(Rng& rng, Shape shape, double s = 1.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-s, s));
  return TF::constant(shape, std::move(v));
}

bool all_zero(const TF& t) {
  for (float v : t.data())
    if (v != 0.0f) return false;
  return true;
}

LocalTokens<float> random_tokens(Rng& rng, std::size_t d) {
  return {random_tensor(rng, {kGridTokens, d + 3}), random_tensor(rng, {1, d}),
          random_tensor(rng, {kNumSeeds, d + 3}), random_tensor(rng, {1, d})};
}

}  // namespace

TEST_CASE("gim output dimension and zero-input response") {
  ParamSet<float> ps;
  Rng rng(1);
  Initializer init(ps, rng);
  init_gim(init, "gim", 16);
  const auto zero = TF::constant({1, 16}, std::vector<float>(16));
  const auto a = gim(ps, "gim", zero, zero);
  CHECK(a.shape() == Shape{1, 16});
  const auto b = gim(ps, "gim", zero, zero);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  Rng r(3);
  const auto c = gim(ps, "gim", random_tensor(r, {1, 16}), random_tensor(r, {1, 16}));
  CHECK(!std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST_CASE("positional_encode builds 22 + V_coarse rows of 3 + D") {
  const auto& body = desk();
  const std::size_t q = body.query_tokens();
  CHECK(q == 108);
  const auto coords = TF::constant({q, 3}, body.template_coords);
  const auto g = TF::constant({1, 64}, std::vector<float>(64));
  const auto t = positional_encode(g, coords);
  CHECK(t.shape() == Shape{108, 67});
  for (std::size_t r = 0; r < q; ++r) {
    for (int c = 0; c < 3; ++c) CHECK(t.at(r * 67 + c) == body.template_coords[3 * r + c]);
    for (std::size_t c = 3; c < 67; ++c) CHECK(t.at(r * 67 + c) == 0.0f);
  }
  const auto paper = bodysim::build_template(ScaleConfig::paper());
  const auto pt = positional_encode(TF::constant({1, 2048}, std::vector<float>(2048)),
                                    TF::constant({paper.query_tokens(), 3}, paper.template_coords));
  CHECK(pt.shape() == Shape{677, 2051});
}

TEST_CASE("mmm evaluation is the identity and consumes no randomness") {
  Rng rng(5);
  const auto tok = random_tokens(rng, 8);
  Rng a(9), b(9);
  MaskDecision d;
  const auto out = apply_mmm(tok, a, MmmConfig{}, false, &d);
  CHECK(d.modality_masked == Modality::none);
  CHECK(d.token_fraction() == 0.0);
  CHECK(out.image_local.data()[0] == tok.image_local.data()[0]);
  CHECK(std::equal(out.point_local.data().begin(), out.point_local.data().end(),
                   tok.point_local.data().begin()));
  CHECK(a.next() == b.next());
}

TEST_CASE("forced image mask zeroes every image token and keeps the points") {
  Rng rng(6);
  const auto tok = random_tokens(rng, 8);
  const auto out = apply_mask(tok, MaskDecision::force(Modality::image, kGridTokens, kNumSeeds));
  CHECK(all_zero(out.image_local));
  CHECK(all_zero(out.image_global));
  CHECK(std::equal(out.point_local.data().begin(), out.point_local.data().end(),
                   tok.point_local.data().begin()));
  CHECK(std::equal(out.point_global.data().begin(), out.point_global.data().end(),
                   tok.point_global.data().begin()));
}

TEST_CASE("modality masking frequency over 10^4 draws") {
  Rng rng(2024);
  MaskLayout layout{true, true, kGridTokens, kNumSeeds};
  std::size_t masked = 0, image = 0;
  double max_fraction = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto d = draw_mask(rng, MmmConfig{}, true, layout);
    masked += d.modality_masked != Modality::none;
    image += d.modality_masked == Modality::image;
    max_fraction = std::max(max_fraction, d.token_fraction());
  }
  CHECK(std::abs(masked / 1e4 - 0.3) <= 0.015);
  CHECK(std::abs(static_cast<double>(image) / masked - 0.5) <= 0.05);
  CHECK(max_fraction <= 0.3 + 1e-12);
  CHECK(max_fraction > 0.2);
}

TEST_CASE("a single-modality layout never masks its only modality") {
  Rng rng(3);
  MaskLayout layout{false, true, 0, kNumSeeds};
  for (int i = 0; i < 500; ++i)
    CHECK(draw_mask(rng, MmmConfig{}, true, layout).modality_masked == Modality::none);
}

TEST_CASE("fusion transformer: shapes, per-layer predictions and attention rows") {
  const auto& body = desk();
  const std::size_t q = body.query_tokens();
  FtmConfig cfg{3, 4, 16, 32};
  ParamSet<float> ps;
  Rng rng(7);
  Initializer init(ps, rng);
  init_ftm(init, "ftm", cfg, FtmInputs{11, true, true, q});
  Rng r(8);
  const auto coords = TF::constant({q, 3}, body.template_coords);
  const auto gt = positional_encode(random_tensor(r, {1, 8}), coords);
  AttentionTrace trace;
  const auto out = fusion_transformer(ps, "ftm", gt, random_tensor(r, {kGridTokens, 11}),
                                      random_tensor(r, {kNumSeeds, 11}), coords, cfg, &trace);
  CHECK(out.queries.shape() == Shape{q, 16});
  CHECK(out.image_local.shape() == Shape{kGridTokens, 16});
  CHECK(out.point_local.shape() == Shape{kNumSeeds, 16});
  REQUIRE(out.layer_preds.size() == 3);
  for (const auto& p : out.layer_preds) CHECK(p.shape() == Shape{q, 3});
  CHECK(trace.maps.size() == cfg.depth * cfg.heads);
  for (const auto& m : trace.maps)
    for (std::size_t i = 0; i < m.rows; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < m.cols; ++j) s += m.weights[i * m.cols + j];
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
  CHECK_THROWS_AS(fusion_transformer(ps, "ftm", gt, random_tensor(r, {kGridTokens, 12}),
                                     random_tensor(r, {kNumSeeds, 11}), coords, cfg),
                  ShapeError);
}

TEST_CASE("with both local sets zeroed the output depends on the queries alone") {
  const auto& body = desk();
  const std::size_t q = body.query_tokens();
  FtmConfig cfg{2, 2, 16, 32};
  ParamSet<float> ps;
  Rng rng(7);
  Initializer init(ps, rng);
  init_ftm(init, "ftm", cfg, FtmInputs{11, true, true, q});
  Rng r(10);
  const auto coords = TF::constant({q, 3}, body.template_coords);
  const auto gt = positional_encode(random_tensor(r, {1, 8}), coords);
  // Different token sets, each with one modality masked and every remaining token dropped.
  auto mask_all = [&](Modality m, std::uint64_t seed) {
    Rng tr(seed);
    auto d = MaskDecision::force(m, kGridTokens, kNumSeeds);
    d.token_mask.assign(kGridTokens + kNumSeeds, true);
    return apply_mask(random_tokens(tr, 8), d);
  };
  const auto a = mask_all(Modality::image, 1);
  const auto b = mask_all(Modality::points, 2);
  const auto oa = fusion_transformer(ps, "ftm", gt, a.image_local, a.point_local, coords, cfg);
  const auto ob = fusion_transformer(ps, "ftm", gt, b.image_local, b.point_local, coords, cfg);
  CHECK(std::memcmp(oa.queries.data().data(), ob.queries.data().data(),
                    oa.queries.data().size() * sizeof(float)) == 0);
}

TEST_CASE("graph decoder: shapes, identity adjacency and permutation equivariance") {
  const std::size_t q = 12;
  DecoderConfig cfg{8, 6};
  ParamSet<float> ps;
  Rng rng(4);
  Initializer init(ps, rng);
  init_graph_decoder(init, "dec", cfg);
  Rng r(5);
  const auto x = random_tensor(r, {q, 8});
  const auto base = random_tensor(r, {q, 3});
  // Random symmetric adjacency.
  std::vector<float> adj(q * q);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j <= i; ++j) adj[i * q + j] = adj[j * q + i] = static_cast<float>(r.uniform(0, 1));
  const auto out = graph_conv_decode(ps, "dec", x, TF::constant({q, q}, adj), base);
  CHECK(out.shape() == Shape{q, 3});

  std::vector<std::size_t> perm(q);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = q; i > 1; --i) std::swap(perm[i - 1], perm[r.index(i)]);
  auto permute_rows = [&](const TF& t) {
    const std::size_t w = t.dim(1);
    std::vector<float> v(t.size());
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t c = 0; c < w; ++c) v[i * w + c] = t.at(perm[i] * w + c);
    return TF::constant(t.shape(), std::move(v));
  };
  std::vector<float> padj(q * q);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j) padj[i * q + j] = adj[perm[i] * q + perm[j]];
  const auto pout = graph_conv_decode(ps, "dec", permute_rows(x), TF::constant({q, q}, padj),
                                      permute_rows(base));
  const auto want = permute_rows(out);
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(pout.at(i) == doctest::Approx(want.at(i)).epsilon(1e-5));

  // Identity adjacency: each row sees only itself, so changing one row's input
  // changes only that row's output.
  std::vector<float> eye(q * q);
  for (std::size_t i = 0; i < q; ++i) eye[i * q + i] = 1.0f;
  const auto e0 = graph_conv_decode(ps, "dec", x, TF::constant({q, q}, eye), base);
  auto xv = std::vector<float>(x.data().begin(), x.data().end());
  for (std::size_t c = 0; c < 8; ++c) xv[3 * 8 + c] += 1.0f;
  const auto e1 = graph_conv_decode(ps, "dec", TF::constant({q, 8}, xv), TF::constant({q, q}, eye), base);
  for (std::size_t i = 0; i < q; ++i) {
    bool same = true;
    for (int c = 0; c < 3; ++c) same = same && e0.at(i * 3 + c) == e1.at(i * 3 + c);
    CHECK(same == (i != 3));
  }
}

TEST_CASE("upsampler at initialization reproduces the template within its rest error") {
  const auto& body = desk();
  ParamSet<float> ps;
  Rng rng(1);
  Initializer init(ps, rng);
  init_upsampler(init, "up", body.num_full(), body.num_coarse(), body.dense_upsample());
  const auto coarse = body.to_coarse(body.full.verts);
  const auto full = upsample_mesh(ps, "up", TF::constant({body.num_coarse(), 3}, coarse));
  CHECK(full.shape() == Shape{body.num_full(), 3});
  double worst = 0;
  for (std::size_t i = 0; i < body.num_full(); ++i) {
    double s = 0;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(full.at(3 * i + c)) - body.full.verts[3 * i + c];
      s += d * d;
    }
    worst = std::max(worst, std::sqrt(s));
  }
  CHECK(worst == doctest::Approx(body.upsample_rest_error).epsilon(1e-4));
  CHECK(body.upsample_rest_error == doctest::Approx(0.102).epsilon(0.01));
}
