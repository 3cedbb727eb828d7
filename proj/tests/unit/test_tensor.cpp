#include <cmath>
#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "immf/common/error.hpp"
#include "immf/common/rng.hpp"
#include "immf/tensor/adam.hpp"
#include "immf/tensor/checkpoint.hpp"
#include "immf/tensor/nn.hpp"
#include "immf/tensor/ops.hpp"

using namespace immf;
using namespace immf::tensor;
using TF = Tensor<float>;
using TD = Tensor<double>;

namespace {

std::vector<double> rand_vec(Rng& rng, std::size_t n, double s = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-s, s);
  return v;
}

void check_values(std::span<const float> got, std::initializer_list<double> want, double tol = 1e-6) {
  REQUIRE(got.size() == want.size());
  std::size_t i = 0;
  for (double w : want) CHECK(got[i++] == doctest::Approx(w).epsilon(tol));
}

}  // namespace

TEST_CASE("matmul examples") {
  auto eye = TF::constant({2, 2}, {1, 0, 0, 1});
  check_values(matmul(eye, eye).data(), {1, 0, 0, 1});
  auto a = TF::constant({2, 2}, {1, 2, 3, 4});
  auto b = TF::constant({2, 1}, {1, 1});
  const auto c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 1});
  check_values(c.data(), {3, 7});
  CHECK_THROWS_AS(matmul(a, TF::constant({3, 1}, {1, 1, 1})), ShapeError);
}

TEST_CASE("matmul gradient of sum is ones times b transposed") {
  Rng rng(4);
  auto a = TD::parameter({5, 7}, rand_vec(rng, 35));
  auto b = TD::parameter({7, 3}, rand_vec(rng, 21));
  backward(sum(matmul(a, b)));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 7; ++k) {
      double want = 0;
      for (std::size_t j = 0; j < 3; ++j) want += b.at(k * 3 + j);
      CHECK(a.grad()[i * 7 + k] == doctest::Approx(want).epsilon(1e-12));
    }
  // Central differences on a few coordinates.
  auto values = a.mutable_data();
  for (std::size_t idx : {0u, 13u, 34u}) {
    const double v = values[idx];
    values[idx] = v + 1e-4;
    const double up = sum(matmul(a, b)).item();
    values[idx] = v - 1e-4;
    const double down = sum(matmul(a, b)).item();
    values[idx] = v;
    CHECK(a.grad()[idx] == doctest::Approx((up - down) / 2e-4).epsilon(1e-6));
  }
}

TEST_CASE("softmax examples and stability") {
  check_values(softmax(TF::constant({1, 3}, {0, 0, 0}), 1).data(), {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto big = softmax(TF::constant({1, 2}, {1000, 0}), 1);
  CHECK(big.at(0) == doctest::Approx(1.0));
  CHECK(big.at(1) >= 0.0f);
  CHECK(big.at(1) < 1e-30f);
  // exp(k) / (e + e^2 + e^3) evaluated independently.
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const auto s = softmax(TD::constant({1, 3}, {1, 2, 3}), 1);
  CHECK(s.at(0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
  CHECK(s.at(0) == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(s.at(1) == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(s.at(2) == doctest::Approx(0.66524).epsilon(1e-4));

  Rng rng(5);
  for (double scale : {1.0, 100.0, 1e4}) {
    std::vector<float> v(6 * 9);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
    const auto out = softmax(TF::constant({6, 9}, v), 1);
    for (std::size_t r = 0; r < 6; ++r) {
      double row = 0;
      for (std::size_t c = 0; c < 9; ++c) {
        const float p = out.at(r * 9 + c);
        CHECK(std::isfinite(p));
        CHECK(p >= 0.0f);
        CHECK(p <= 1.0f);
        row += p;
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("conv2d examples") {
  Rng rng(6);
  std::vector<float> x(2 * 4 * 4);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  auto xt = TF::constant({2, 4, 4}, x);
  auto k1 = TF::constant({2, 2, 1, 1}, {1, 0, 0, 1});
  const auto id = conv2d(xt, k1, TF(), 1);
  CHECK(id.shape() == Shape{2, 4, 4});
  CHECK(std::memcmp(id.data().data(), x.data(), x.size() * sizeof(float)) == 0);

  auto ones = TF::constant({1, 5, 5}, std::vector<float>(25, 1.0f));
  auto k3 = TF::constant({1, 1, 3, 3}, std::vector<float>(9, 1.0f));
  const auto nine = conv2d(ones, k3, TF(), 1);
  CHECK(nine.shape() == Shape{1, 3, 3});
  for (float v : nine.data()) CHECK(v == 9.0f);

  CHECK_THROWS_AS(conv2d(ones, TF::constant({1, 2, 3, 3}, std::vector<float>(18, 1.0f)), TF(), 1),
                  ShapeError);
}

TEST_CASE("segment_max examples and gradient routing") {
  auto one = TF::constant({1, 2}, {4, -2});
  const std::vector<std::size_t> z{0};
  check_values(segment_max(one, z, 1).data(), {4, -2});

  auto rows = TD::parameter({3, 1}, {1, 5, 3});
  const std::vector<std::size_t> ids{0, 0, 1};
  const auto m = segment_max(rows, ids, 3);
  CHECK(m.shape() == Shape{3, 1});
  CHECK(m.at(0) == 5.0);
  CHECK(m.at(1) == 3.0);
  CHECK(m.at(2) == 0.0);  // empty segment

  backward(sum(m));
  CHECK(rows.grad()[0] == 0.0);
  CHECK(rows.grad()[1] == 1.0);
  CHECK(rows.grad()[2] == 1.0);

  auto tie = TD::parameter({3, 1}, {2, 2, 1});
  const std::vector<std::size_t> same{0, 0, 0};
  backward(sum(segment_max(tie, same, 1)));
  CHECK(tie.grad()[0] == 1.0);
  CHECK(tie.grad()[1] == 0.0);
  CHECK(tie.grad()[2] == 0.0);
}

TEST_CASE("layer_norm examples") {
  auto g = TD::constant({2}, {1, 1});
  auto b = TD::constant({2}, {0, 0});
  const auto y = layer_norm(TD::constant({2, 2}, {3, 3, 1, 3}), g, b);
  CHECK(y.at(0) == 0.0);
  CHECK(y.at(1) == 0.0);
  // (x - mean) / sqrt(var + eps) with population variance 1.
  CHECK(y.at(2) == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));
  CHECK(y.at(3) == doctest::Approx(1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));
}

TEST_CASE("backward basics") {
  Rng rng(7);
  auto x = TD::parameter({3, 4}, rand_vec(rng, 12));
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);

  x.zero_grad();
  const auto loss = sum(mul(x, x));
  backward(loss);
  std::vector<double> once(x.grad().begin(), x.grad().end());
  for (std::size_t i = 0; i < 12; ++i) CHECK(once[i] == doctest::Approx(2.0 * x.at(i)));
  backward(loss);  // no reset: accumulates
  for (std::size_t i = 0; i < 12; ++i) CHECK(x.grad()[i] == 2.0 * once[i]);

  CHECK_THROWS_AS(backward(mul(x, x)), ValidationError);
}

TEST_CASE("non-finite values abort with the op name") {
  auto a = TF::constant({1, 2}, {1e30f, 1.0f});
  try {
    (void)mul(a, a);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(e.op() == "mul");
  }
}

TEST_CASE("ops are deterministic") {
  Rng rng(8);
  std::vector<float> v(16 * 8);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  ParamSet<float> ps;
  Rng init_rng(1);
  Initializer init(ps, init_rng);
  init.transformer_block("t", 8, 16);
  auto x = TF::constant({16, 8}, v);
  const auto a = transformer_block(ps, "t", x, 2);
  const auto b = transformer_block(ps, "t", x, 2);
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("attention maps are row-stochastic") {
  ParamSet<float> ps;
  Rng rng(9);
  Initializer init(ps, rng);
  init.attention("a", 8);
  std::vector<float> q(5 * 8), kv(7 * 8);
  for (auto& x : q) x = static_cast<float>(rng.uniform(-2, 2));
  for (auto& x : kv) x = static_cast<float>(rng.uniform(-2, 2));
  AttentionTrace trace;
  (void)multi_head_attention(ps, "a", TF::constant({5, 8}, q), TF::constant({7, 8}, kv), 4, &trace);
  REQUIRE(trace.maps.size() == 4);
  for (const auto& m : trace.maps) {
    CHECK(m.rows == 5);
    CHECK(m.cols == 7);
    for (std::size_t r = 0; r < m.rows; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < m.cols; ++c) s += m.weights[r * m.cols + c];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("adam") {
  ParamSet<float> ps;
  ps.add("w", TF::parameter({3}, {0.5f, -1.0f, 2.0f}));
  AdamState state;
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};

  SUBCASE("zero gradient leaves parameters unchanged") {
    ps.zero_grad();
    adam_step(ps, state, cfg);
    const auto w = ps.at("w").data();
    CHECK(w[0] == 0.5f);
    CHECK(w[1] == -1.0f);
    CHECK(w[2] == 2.0f);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    auto& w = ps.at("w");
    auto g = w.mutable_grad();
    g[0] = 0.3f, g[1] = -2.0f, g[2] = 1e-3f;
    adam_step(ps, state, cfg);
    check_values(w.data(), {0.49, -0.99, 1.99}, 1e-5);
  }
}

TEST_CASE("adam converges on a quadratic and matches an independent recurrence") {
  const std::vector<double> target{0.7, -0.4, 0.15};
  const AdamConfig cfg{0.05, 0.9, 0.999, 1e-8};
  ParamSet<float> ps;
  ps.add("w", TF::parameter({3}, {0, 0, 0}));
  AdamState state;
  // Scalar recurrence in double.
  std::vector<double> w(3, 0.0), m(3, 0.0), v(3, 0.0);
  for (int step = 1; step <= 200; ++step) {
    auto& wt = ps.at("w");
    auto g = wt.mutable_grad();
    for (std::size_t i = 0; i < 3; ++i) g[i] = 2.0f * (wt.data()[i] - static_cast<float>(target[i]));
    adam_step(ps, state, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
      const double gi = 2.0 * (w[i] - target[i]);
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * gi * gi;
      const double mh = m[i] / (1 - std::pow(cfg.beta1, step));
      const double vh = v[i] / (1 - std::pow(cfg.beta2, step));
      w[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ps.at("w").data()[i] == doctest::Approx(w[i]).epsilon(1e-4));
    CHECK(std::abs(ps.at("w").data()[i] - target[i]) < 1e-3);
  }
}

TEST_CASE("checkpoint round-trips bitwise") {
  ParamSet<float> ps;
  Rng rng(10);
  Initializer init(ps, rng);
  init.mlp("m", 4, 8, 3);
  init.layer_norm("n", 3);
  AdamState st;
  st.step = 7;
  for (const auto& [name, t] : ps) {
    st.m[name].assign(t.size(), 0.25f);
    st.v[name].assign(t.size(), 1e-7f);
  }
  const auto dir = std::filesystem::temp_directory_path() / "immf_test_ckpt";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir, ps, st, {{"note", "x"}});
  const auto back = load_checkpoint(dir);
  CHECK(back.params.same_values(ps));
  CHECK(back.adam.step == 7);
  CHECK(back.adam.m == st.m);
  CHECK(back.adam.v == st.v);
  CHECK(back.meta.at("note") == "x");
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_checkpoint(dir), IoError);
}
