#include "immf/bench/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include "immf/bodysim/dataset.hpp"
#include "immf/common/rng.hpp"
#include "immf/encoders/image_encoder.hpp"
#include "immf/encoders/point_encoder.hpp"
#include "immf/fusion/decoder.hpp"
#include "immf/fusion/gim.hpp"
#include "immf/fusion/mmm.hpp"
#include "immf/fusion/transformer.hpp"
#include "immf/tensor/nn.hpp"
#include "immf/tensor/ops.hpp"
#include "immf/trainer/loss.hpp"
#include "immf/trainer/model.hpp"
#include "immf/trainer/variant.hpp"

namespace immf::bench {

using namespace immf::tensor;
using T64 = Tensor<double>;

namespace {

struct Case {
  std::string name;
  std::vector<std::pair<std::string, T64>> inputs;
  std::function<T64()> loss;
  std::size_t samples = 0;  // per input; 0 means the suite default
};

T64 random_param(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return T64::parameter(std::move(shape), std::move(v));
}

T64 random_const(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return T64::constant(std::move(shape), std::move(v));
}

// sum(y * W) with W fixed on first use, so every coordinate of y matters.
class Projector {
 public:
  explicit Projector(std::uint64_t seed) : rng_(seed) {}
  T64 operator()(const T64& y) {
    if (!w_.defined() || w_.shape() != y.shape()) w_ = random_const(y.shape(), rng_);
    return sum(mul(y, w_));
  }

 private:
  Rng rng_;
  T64 w_;
};

std::vector<std::pair<std::string, T64>> param_inputs(const ParamSet<double>& ps) {
  std::vector<std::pair<std::string, T64>> out;
  for (const auto& [name, t] : ps) out.emplace_back(name, t);
  return out;
}

GradCaseResult check_case(Case& c, const GradSuiteOptions& opts, Rng& rng) {
  GradCaseResult r;
  r.name = c.name;
  for (auto& [_, t] : c.inputs) t.zero_grad();
  backward(c.loss());
  const std::size_t per_input = c.samples ? c.samples : opts.samples_per_input;
  for (auto& [label, t] : c.inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > per_input) {
      for (std::size_t i = 0; i < per_input; ++i)
        std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
      idx.resize(per_input);
    }
    auto values = t.mutable_data();
    for (std::size_t i : idx) {
      const double v = values[i];
      values[i] = v + opts.h;
      const double lp = c.loss().item();
      values[i] = v - opts.h;
      const double lm = c.loss().item();
      values[i] = v;
      const double numeric = (lp - lm) / (2.0 * opts.h);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = grad_rel_error(a, numeric);
      ++r.checked;
      if (err > r.max_rel_error || !std::isfinite(err)) {
        r.max_rel_error = std::isfinite(err) ? err : INFINITY;
        r.worst = label + "[" + std::to_string(i) + "]";
      }
    }
  }
  r.passed = r.checked > 0 && r.max_rel_error < opts.tolerance;
  return r;
}

std::vector<Case> op_cases(Rng& rng) {
  std::vector<Case> cases;
  auto proj = std::make_shared<Projector>(rng.next());
  auto unary = [&](std::string name, Shape shape, std::function<T64(const T64&)> f, double scale = 1.0) {
    auto x = random_param(shape, rng, scale);
    cases.push_back({std::move(name), {{"x", x}}, [proj, x, f] { return (*proj)(f(x)); }});
  };
  auto binary = [&](std::string name, Shape sa, Shape sb, std::function<T64(const T64&, const T64&)> f) {
    auto a = random_param(sa, rng), b = random_param(sb, rng);
    cases.push_back({std::move(name), {{"a", a}, {"b", b}}, [proj, a, b, f] { return (*proj)(f(a, b)); }});
  };

  binary("matmul", {3, 4}, {4, 5}, [](const T64& a, const T64& b) { return matmul(a, b); });
  unary("transpose", {3, 4}, [](const T64& x) { return transpose(x); });
  binary("add", {3, 4}, {3, 4}, [](const T64& a, const T64& b) { return add(a, b); });
  binary("sub", {3, 4}, {3, 4}, [](const T64& a, const T64& b) { return sub(a, b); });
  binary("mul", {3, 4}, {3, 4}, [](const T64& a, const T64& b) { return mul(a, b); });
  unary("affine_scalar", {2, 5}, [](const T64& x) { return affine_scalar(x, 1.7, 0.3); });
  binary("add_bias", {3, 4}, {4}, [](const T64& a, const T64& b) { return add_bias(a, b); });
  binary("scale_rows", {3, 4}, {3}, [](const T64& a, const T64& b) { return scale_rows(a, b); });
  unary("gelu", {4, 5}, [](const T64& x) { return gelu(x); }, 3.0);
  unary("sigmoid", {4, 5}, [](const T64& x) { return sigmoid(x); }, 3.0);
  unary("softmax_axis0", {4, 5}, [](const T64& x) { return softmax(x, 0); }, 2.0);
  unary("softmax_axis1", {4, 5}, [](const T64& x) { return softmax(x, 1); }, 2.0);
  {
    auto x = random_param({3, 6}, rng), g = random_param({6}, rng), b = random_param({6}, rng);
    cases.push_back({"layer_norm", {{"x", x}, {"gain", g}, {"bias", b}},
                     [proj, x, g, b] { return (*proj)(layer_norm(x, g, b)); }});
  }
  {
    auto x = random_param({2, 6, 6}, rng), k = random_param({3, 2, 3, 3}, rng),
         b = random_param({3}, rng);
    cases.push_back({"conv2d_s1_p1", {{"x", x}, {"k", k}, {"bias", b}},
                     [proj, x, k, b] { return (*proj)(conv2d(x, k, b, 1, 1)); }});
    auto k2 = random_param({4, 2, 2, 2}, rng);
    cases.push_back({"conv2d_s2", {{"x", x}, {"k", k2}},
                     [proj, x, k2] { return (*proj)(conv2d(x, k2, T64(), 2, 0)); }});
  }
  {
    // Distinct values spaced well beyond h keep every max away from a tie.
    const std::size_t n = 7, d = 3;
    std::vector<double> v(n * d);
    std::iota(v.begin(), v.end(), 0.0);
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
    for (auto& x : v) x *= 0.05;
    auto x = T64::parameter({n, d}, v);
    auto ids = std::make_shared<std::vector<std::size_t>>(std::vector<std::size_t>{0, 2, 1, 0, 2, 2, 1});
    cases.push_back({"segment_max", {{"x", x}}, [proj, x, ids] {
                       return (*proj)(segment_max(x, *ids, 4));
                     }});
  }
  unary("reshape", {3, 4}, [](const T64& x) { return reshape(x, {2, 6}); });
  binary("concat_axis0", {2, 4}, {3, 4}, [](const T64& a, const T64& b) { return concat<double>({a, b}, 0); });
  binary("concat_axis1", {3, 2}, {3, 4}, [](const T64& a, const T64& b) { return concat<double>({a, b}, 1); });
  unary("slice_axis0", {5, 3}, [](const T64& x) { return slice(x, 0, 1, 4); });
  unary("slice_axis1", {3, 5}, [](const T64& x) { return slice(x, 1, 2, 5); });
  unary("gather_rows", {4, 3}, [](const T64& x) {
    const std::vector<std::size_t> idx{3, 0, 3, 1};
    return gather_rows(x, std::span<const std::size_t>(idx));
  });
  unary("mask_rows", {4, 3}, [](const T64& x) { return mask_rows(x, {true, false, true, true}); });
  unary("repeat_rows", {1, 4}, [](const T64& x) { return repeat_rows(x, 3); });
  unary("mean_rows", {5, 3}, [](const T64& x) { return mean_rows(x); });
  unary("sum", {3, 3}, [](const T64& x) { return sum(x); });
  {
    // Residuals kept at least 0.1 from the kink at zero.
    auto pred = random_param({4, 3}, rng);
    std::vector<double> tv(pred.data().begin(), pred.data().end());
    for (auto& t : tv) t += (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 0.5);
    auto target = T64::constant({4, 3}, tv);
    cases.push_back({"l1_loss", {{"pred", pred}}, [pred, target] { return l1_loss(pred, target); }});
  }
  return cases;
}

ParamSet<double> make_params(Rng& rng, const std::function<void(Initializer&)>& fill) {
  ParamSet<float> ps;
  Initializer init(ps, rng);
  fill(init);
  return ps.cast<double>();
}

std::vector<Case> nn_cases(Rng& rng) {
  std::vector<Case> cases;
  auto proj = std::make_shared<Projector>(rng.next());
  auto add_case = [&](std::string name, ParamSet<double> ps, std::vector<T64> xs,
                      std::function<T64(const ParamSet<double>&, const std::vector<T64>&)> f) {
    auto inputs = param_inputs(ps);
    for (std::size_t i = 0; i < xs.size(); ++i) inputs.emplace_back("x" + std::to_string(i), xs[i]);
    auto shared = std::make_shared<ParamSet<double>>(std::move(ps));
    cases.push_back({std::move(name), std::move(inputs),
                     [proj, shared, xs, f] { return (*proj)(f(*shared, xs)); }});
  };

  add_case("linear", make_params(rng, [](Initializer& i) { i.linear("l", 5, 4); }),
           {random_param({3, 5}, rng)},
           [](const ParamSet<double>& ps, const std::vector<T64>& x) { return linear(ps, "l", x[0]); });
  add_case("layer_norm_module", make_params(rng, [](Initializer& i) { i.layer_norm("n", 6); }),
           {random_param({3, 6}, rng)}, [](const ParamSet<double>& ps, const std::vector<T64>& x) {
             return layer_norm(ps, "n", x[0]);
           });
  add_case("mlp", make_params(rng, [](Initializer& i) { i.mlp("m", 4, 6, 3); }),
           {random_param({3, 4}, rng)},
           [](const ParamSet<double>& ps, const std::vector<T64>& x) { return mlp(ps, "m", x[0]); });
  add_case("multi_head_attention", make_params(rng, [](Initializer& i) { i.attention("a", 8); }),
           {random_param({5, 8}, rng), random_param({7, 8}, rng)},
           [](const ParamSet<double>& ps, const std::vector<T64>& x) {
             return multi_head_attention(ps, "a", x[0], x[1], 2);
           });
  add_case("transformer_block",
           make_params(rng, [](Initializer& i) { i.transformer_block("t", 8, 16); }),
           {random_param({5, 8}, rng)}, [](const ParamSet<double>& ps, const std::vector<T64>& x) {
             return transformer_block(ps, "t", x[0], 2);
           });
  add_case("cross_attention_block",
           make_params(rng, [](Initializer& i) { i.cross_attention_block("c", 8, 16); }),
           {random_param({4, 8}, rng), random_param({6, 8}, rng)},
           [](const ParamSet<double>& ps, const std::vector<T64>& x) {
             return cross_attention_block(ps, "c", x[0], x[1], 2);
           });

  // Fusion and encoder modules at reduced widths.
  {
    encoders::ImageEncoderConfig cfg{14, 8};
    add_case("image_encoder",
             make_params(rng, [&](Initializer& i) { encoders::init_image_encoder(i, "im", cfg); }),
             {random_param({3, 14, 14}, rng, 0.5)},
             [cfg](const ParamSet<double>& ps, const std::vector<T64>& x) {
               const auto t = encoders::encode_image(ps, "im", x[0], cfg);
               return concat<double>({reshape(t.local, {t.local.size(), 1}),
                                      reshape(t.global, {t.global.size(), 1})},
                                     0);
             });
  }
  {
    encoders::PointEncoderConfig cfg;
    cfg.feature_dim = 8;
    cfg.hidden = 8;
    cfg.seeds = 4;
    cfg.radius = 0.6;
    cfg.max_group = 6;
    std::vector<float> cloud(kNumPoints * 3);
    for (auto& v : cloud) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    auto grouping = std::make_shared<encoders::Grouping>(
        encoders::make_grouping(cloud, cfg.seeds, cfg.radius, cfg.max_group));
    auto pts = T64::constant({kNumPoints, 3}, std::vector<double>(cloud.begin(), cloud.end()));
    add_case("point_encoder",
             make_params(rng, [&](Initializer& i) { encoders::init_point_encoder(i, "pc", cfg); }), {},
             [cfg, grouping, pts](const ParamSet<double>& ps, const std::vector<T64>&) {
               const auto t = encoders::encode_points(ps, "pc", pts, T64(), *grouping, cfg);
               return concat<double>({reshape(t.local, {t.local.size(), 1}),
                                      reshape(t.global, {t.global.size(), 1})},
                                     0);
             });
  }
  add_case("gim", make_params(rng, [](Initializer& i) { fusion::init_gim(i, "g", 8); }),
           {random_param({1, 8}, rng), random_param({1, 8}, rng)},
           [](const ParamSet<double>& ps, const std::vector<T64>& x) {
             return fusion::gim(ps, "g", x[0], x[1]);
           });
  {
    auto coords = random_const({5, 3}, rng);
    add_case("positional_encode", ParamSet<double>{}, {random_param({1, 4}, rng)},
             [coords](const ParamSet<double>&, const std::vector<T64>& x) {
               return fusion::positional_encode(x[0], coords);
             });
  }
  {
    fusion::FtmConfig cfg{2, 2, 8, 16};
    fusion::FtmInputs in{7, true, true};
    auto coords = random_const({6, 3}, rng);
    add_case("fusion_transformer",
             make_params(rng, [&](Initializer& i) { fusion::init_ftm(i, "f", cfg, in); }),
             {random_param({6, 7}, rng), random_param({4, 7}, rng), random_param({3, 7}, rng)},
             [cfg, coords](const ParamSet<double>& ps, const std::vector<T64>& x) {
               const auto o = fusion::fusion_transformer(ps, "f", x[0], x[1], x[2], coords, cfg);
               std::vector<T64> parts{reshape(o.queries, {o.queries.size(), 1})};
               for (const auto& p : o.layer_preds) parts.push_back(reshape(p, {p.size(), 1}));
               return concat<double>(parts, 0);
             });
  }
  {
    fusion::DecoderConfig cfg{8, 6};
    std::vector<double> a(25);
    for (auto& v : a) v = rng.uniform(0.0, 0.4);
    auto adj = T64::constant({5, 5}, a);
    auto coords = random_const({5, 3}, rng);
    add_case("graph_conv_decode",
             make_params(rng, [&](Initializer& i) { fusion::init_graph_decoder(i, "d", cfg); }),
             {random_param({5, 8}, rng)},
             [adj, coords](const ParamSet<double>& ps, const std::vector<T64>& x) {
               return fusion::graph_conv_decode(ps, "d", x[0], adj, coords);
             });
  }
  {
    std::vector<float> u(7 * 4);
    for (auto& v : u) v = static_cast<float>(rng.uniform(0.0, 0.5));
    add_case("upsample_mesh",
             make_params(rng, [&](Initializer& i) { fusion::init_upsampler(i, "u", 7, 4, u); }),
             {random_param({4, 3}, rng)}, [](const ParamSet<double>& ps, const std::vector<T64>& x) {
               return fusion::upsample_mesh(ps, "u", x[0]);
             });
  }
  {
    auto decision = fusion::MaskDecision::none(3, 2);
    decision.token_mask = {true, false, true, false, true};
    add_case("apply_mask", ParamSet<double>{},
             {random_param({3, 4}, rng), random_param({1, 4}, rng), random_param({2, 4}, rng),
              random_param({1, 4}, rng)},
             [decision](const ParamSet<double>&, const std::vector<T64>& x) {
               const auto m = fusion::apply_mask<double>({x[0], x[1], x[2], x[3]}, decision);
               return concat<double>({m.image_local, m.image_global, m.point_local, m.point_global}, 0);
             });
  }
  return cases;
}

// The real training loss on two frames. Every target sits a few centimeters
// beyond all predictions it is compared with, so no L1 term is near its kink.
Case end_to_end_case(Rng& rng) {
  auto body = std::make_shared<bodysim::BodyTemplate>(bodysim::build_template(ScaleConfig::desk()));
  auto model = std::make_shared<trainer::Model>(trainer::build_variant("immfusion"), body);
  auto ps = std::make_shared<ParamSet<double>>(model->init_params(rng.next()).cast<double>());
  bodysim::GenerateOptions gen;
  gen.count = 2;
  gen.seed = rng.next();
  auto frames = std::make_shared<std::vector<bodysim::Frame>>(bodysim::generate_frames(*body, gen));

  // preds[k][first + i] for each prediction k.
  auto clear_of = [&](const std::vector<std::span<const double>>& preds, std::size_t first,
                      std::size_t n) {
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      double lo = preds[0][first + i], hi = lo;
      for (const auto& p : preds) {
        lo = std::min(lo, p[first + i]);
        hi = std::max(hi, p[first + i]);
      }
      const double gap = rng.uniform(0.02, 0.06);
      out[i] = static_cast<float>(rng.bernoulli(0.5) ? hi + gap : lo - gap);
    }
    return out;
  };
  for (auto& f : *frames) {
    const auto out = model->forward(*ps, f.points, f.image);
    std::vector<std::span<const double>> layers;
    for (const auto& l : out.layer_preds) layers.push_back(l.data());
    auto joint_preds = layers;
    joint_preds.push_back(out.joints.data());
    f.joints = clear_of(joint_preds, 0, 3 * kNumJoints);
    f.verts_full = clear_of({out.verts_full.data()}, 0, out.verts_full.data().size());
    f.verts_coarse = clear_of(layers, 3 * kNumJoints, layers[0].size() - 3 * kNumJoints);
  }

  Case c;
  c.name = "end_to_end_immfusion";
  c.inputs = param_inputs(*ps);
  c.loss = [model, ps, frames] {
    std::vector<T64> terms;
    for (const auto& f : *frames) {
      const auto out = model->forward(*ps, f.points, f.image);
      terms.push_back(trainer::compute_loss(out, f, model->body(), false).total);
    }
    return affine_scalar(add(terms[0], terms[1]), 0.5);
  };
  return c;
}

}  // namespace

double grad_rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / denom;
}

std::vector<GradCaseResult> run_gradient_suite(const GradSuiteOptions& opts) {
  Rng rng(opts.seed);
  std::vector<GradCaseResult> results;
  for (auto& c : op_cases(rng)) results.push_back(check_case(c, opts, rng));
  for (auto& c : nn_cases(rng)) results.push_back(check_case(c, opts, rng));
  auto e2e = end_to_end_case(rng);
  e2e.samples = opts.samples_per_param;
  results.push_back(check_case(e2e, opts, rng));
  return results;
}

}  // namespace immf::bench
