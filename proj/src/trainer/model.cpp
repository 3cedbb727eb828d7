#include "immf/trainer/model.hpp"

#include <algorithm>
#include <cmath>

#include "immf/bodysim/pose.hpp"
#include "immf/bodysim/profile.hpp"
#include "immf/common/error.hpp"
#include "immf/fusion/gim.hpp"

namespace immf::trainer {

using namespace immf::tensor;
using fusion::Modality;

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;  // "init"

template <typename T>
Tensor<T> constant_of(Shape shape, std::span<const float> values) {
  return Tensor<T>::constant(std::move(shape), std::vector<T>(values.begin(), values.end()));
}

}  // namespace

Model::Model(ModelSpec spec, std::shared_ptr<const bodysim::BodyTemplate> body)
    : spec_(std::move(spec)), body_(std::move(body)) {
  if (!body_) throw ValidationError("model: missing body template");
  if (body_->num_full() != spec_.scale.verts_full || body_->num_coarse() != spec_.scale.verts_coarse)
    throw ValidationError("model: template scale does not match the model spec");
  if (spec_.decoder.in_dim != spec_.ftm.hidden)
    throw ValidationError("model: decoder input must match the transformer width");
  adjacency_ = body_->normalized_adjacency();
}

fusion::MaskLayout Model::mask_layout() const {
  fusion::MaskLayout l;
  l.image = spec_.image_stream;
  l.points = spec_.point_stream;
  l.image_tokens = spec_.image_stream && spec_.local_tokens ? kGridTokens : 0;
  l.point_tokens = spec_.point_stream && spec_.local_tokens ? kNumSeeds : 0;
  return l;
}

ParamSet<float> Model::init_params(std::uint64_t seed) const {
  ParamSet<float> ps;
  Rng rng(derive_seed(seed, kInitStream));
  Initializer init(ps, rng);
  const std::size_t d = spec_.scale.feature_dim;
  const std::size_t token_dim = spec_.scale.token_dim();
  const std::size_t hidden = spec_.ftm.hidden;

  if (spec_.needs_image_encoder())
    encoders::init_image_encoder(init, "encoder.image", spec_.image_encoder());
  if (spec_.point_stream) encoders::init_point_encoder(init, "encoder.points", spec_.point_encoder());

  auto init_decoder = [&](const std::string& prefix) {
    fusion::init_graph_decoder(init, prefix + ".decoder", spec_.decoder);
    fusion::init_upsampler(init, prefix + ".upsampler", body_->num_full(), body_->num_coarse(),
                           body_->dense_upsample());
  };

  switch (spec_.arch) {
    case Architecture::token_fusion_transformer: {
      if (spec_.global == GlobalFusion::gim) fusion::init_gim(init, "fusion.gim", d);
      fusion::FtmInputs inputs{token_dim, spec_.image_stream && spec_.local_tokens,
                               spec_.point_stream && spec_.local_tokens, body_->query_tokens()};
      fusion::init_ftm(init, "fusion.ftm", spec_.ftm, inputs);
      init_decoder("fusion");
      break;
    }
    case Architecture::deep_fusion:
      init.linear("fusion.df.in_points", token_dim, hidden);
      init.linear("fusion.df.in_image", token_dim, hidden);
      init.cross_attention_block("fusion.df.cross", hidden, spec_.ftm.ff);
      init.linear("fusion.df.head", hidden + 2 * d, kPoseDim, 0.1);
      break;
    case Architecture::token_fusion_baseline:
      for (const char* s : {"image", "points"}) {
        const std::string p = std::string("fusion.tf.") + s;
        init.mlp(p + ".in_query", token_dim, hidden, hidden);
        init.linear(p + ".in_local", token_dim, hidden);
        for (std::size_t l = 0; l < spec_.ftm.depth; ++l) {
          init.transformer_block(p + ".block" + std::to_string(l), hidden, spec_.ftm.ff);
          if (l + 1 < spec_.ftm.depth) init.linear(p + ".score" + std::to_string(l), hidden, 1);
        }
      }
      for (std::size_t l = 0; l < spec_.ftm.depth; ++l) {
        init.layer_norm("fusion.tf.head_norm" + std::to_string(l), hidden);
        init.linear("fusion.tf.head" + std::to_string(l), hidden, 3, 0.1);
      }
      init_decoder("fusion");
      break;
  }
  return ps;
}

std::vector<float> Model::decorate_rgb(std::span<const float> points,
                                       std::span<const float> image) const {
  const std::size_t n = spec_.scale.image_size;
  const bodysim::CaptureWindow window;
  std::vector<float> rgb(kNumPoints * 3);
  for (std::size_t i = 0; i < kNumPoints; ++i) {
    const auto col = static_cast<std::size_t>(
        std::clamp(window.column(points[3 * i], n), 0.0, static_cast<double>(n) - 1));
    const auto row = static_cast<std::size_t>(
        std::clamp(window.row(points[3 * i + 1], n), 0.0, static_cast<double>(n) - 1));
    for (std::size_t c = 0; c < 3; ++c) rgb[3 * i + c] = image[(c * n + row) * n + col];
  }
  return rgb;
}

std::vector<std::size_t> Model::point_cells(std::span<const float> points) const {
  const bodysim::CaptureWindow window;
  const double side = static_cast<double>(kGridSide);
  std::vector<std::size_t> cells(kNumPoints);
  for (std::size_t i = 0; i < kNumPoints; ++i) {
    const auto cx = static_cast<std::size_t>(
        std::clamp(window.column(points[3 * i], kGridSide), 0.0, side - 1));
    const auto cy = static_cast<std::size_t>(
        std::clamp(window.row(points[3 * i + 1], kGridSide), 0.0, side - 1));
    cells[i] = cy * kGridSide + cx;
  }
  return cells;
}

template <typename T>
void Model::decode(const ParamSet<T>& ps, const std::string& prefix, const Tensor<T>& queries,
                   ModelOutput<T>& out) const {
  const std::size_t q = body_->query_tokens();
  const auto adjacency = constant_of<T>({q, q}, adjacency_);
  // The decoder refines the last coarse prediction.
  const auto base = out.layer_preds.empty() ? constant_of<T>({q, 3}, body_->template_coords)
                                            : out.layer_preds.back();
  const auto decoded = fusion::graph_conv_decode(ps, prefix + ".decoder", queries, adjacency, base);
  out.joints = slice(decoded, 0, 0, kNumJoints);
  out.verts_coarse = slice(decoded, 0, kNumJoints, q);
  out.verts_full = fusion::upsample_mesh(ps, prefix + ".upsampler", out.verts_coarse);
  out.queries_out = queries;
}

template <typename T>
ModelOutput<T> Model::forward(const ParamSet<T>& ps, std::span<const float> points,
                              std::span<const float> image, const ForwardOptions& opts) const {
  const std::size_t n = spec_.scale.image_size;
  if (points.size() != kNumPoints * 3)
    throw ShapeError("model: expected 1024 x 3 points, got " + std::to_string(points.size()) +
                     " values");
  if (image.size() != 3 * n * n)
    throw ShapeError("model: expected a 3 x " + std::to_string(n) + " x " + std::to_string(n) +
                     " image, got " + std::to_string(image.size()) + " values");
  switch (spec_.arch) {
    case Architecture::deep_fusion: return forward_deepfusion(ps, points, image);
    case Architecture::token_fusion_baseline: return forward_tokenfusion(ps, points, image, opts);
    default: return forward_fusion(ps, points, image, opts);
  }
}

template <typename T>
ModelOutput<T> Model::forward_fusion(const ParamSet<T>& ps, std::span<const float> points,
                                     std::span<const float> image,
                                     const ForwardOptions& opts) const {
  const std::size_t n = spec_.scale.image_size, d = spec_.scale.feature_dim;
  const std::size_t q = body_->query_tokens();
  const auto layout = mask_layout();

  ModelOutput<T> out;
  if (opts.forced_mask) {
    out.mask = *opts.forced_mask;
  } else if (spec_.mmm && opts.training) {
    if (!opts.rng) throw ValidationError("model: training with masking needs an RNG");
    out.mask = fusion::draw_mask(*opts.rng, opts.mmm ? *opts.mmm : spec_.mmm_config, true, layout);
  } else {
    out.mask = fusion::MaskDecision::none(layout.image_tokens, layout.point_tokens);
  }
  const bool image_masked = out.mask.modality_masked == Modality::image;
  const bool points_masked = out.mask.modality_masked == Modality::points;

  fusion::LocalTokens<T> tokens;
  encoders::ImageTokens<T> im;
  const bool run_image = spec_.needs_image_encoder() &&
                         !(image_masked && spec_.decoration != Decoration::image_feature);
  if (run_image)
    im = encoders::encode_image(ps, "encoder.image", constant_of<T>({3, n, n}, image),
                                spec_.image_encoder());
  if (spec_.image_stream) {
    if (image_masked) {
      tokens.image_local = Tensor<T>::zeros({kGridTokens, d + 3});
      tokens.image_global = Tensor<T>::zeros({1, d});
    } else {
      tokens.image_local = im.local;
      tokens.image_global = im.global;
    }
  }
  if (spec_.point_stream) {
    if (points_masked) {
      tokens.point_local = Tensor<T>::zeros({kNumSeeds, 3 + d});
      tokens.point_global = Tensor<T>::zeros({1, d});
    } else {
      const auto pcfg = spec_.point_encoder();
      const auto cloud = constant_of<T>({kNumPoints, 3}, points);
      Tensor<T> decoration;
      if (spec_.decoration == Decoration::rgb)
        decoration = constant_of<T>({kNumPoints, 3}, decorate_rgb(points, image));
      else if (spec_.decoration == Decoration::image_feature)
        decoration = gather_rows(im.features, point_cells(points));
      const auto grouping =
          encoders::make_grouping(points, pcfg.seeds, pcfg.radius, pcfg.max_group);
      auto pt = encoders::encode_points(ps, "encoder.points", cloud, decoration, grouping, pcfg);
      tokens.point_local = pt.local;
      tokens.point_global = pt.global;
    }
  }
  if (!spec_.local_tokens) {
    tokens.image_local = Tensor<T>();
    tokens.point_local = Tensor<T>();
  }
  tokens = fusion::apply_mask(tokens, out.mask);

  Tensor<T> g;
  switch (spec_.global) {
    case GlobalFusion::gim:
      g = fusion::gim(ps, "fusion.gim", tokens.image_global, tokens.point_global, opts.trace);
      break;
    case GlobalFusion::mean:
      g = affine_scalar(add(tokens.image_global, tokens.point_global), T(0.5));
      break;
    case GlobalFusion::image_only: g = tokens.image_global; break;
    case GlobalFusion::points_only: g = tokens.point_global; break;
  }
  const auto coords = constant_of<T>({q, 3}, body_->template_coords);
  out.query_tokens = fusion::positional_encode(g, coords);
  out.image_local = tokens.image_local;
  out.point_local = tokens.point_local;
  auto ftm = fusion::fusion_transformer(ps, "fusion.ftm", out.query_tokens, tokens.image_local,
                                        tokens.point_local, coords, spec_.ftm, opts.trace);
  out.layer_preds = std::move(ftm.layer_preds);
  decode(ps, "fusion", ftm.queries, out);
  return out;
}

template <typename T>
ModelOutput<T> Model::forward_deepfusion(const ParamSet<T>& ps, std::span<const float> points,
                                         std::span<const float> image) const {
  const std::size_t n = spec_.scale.image_size;
  ModelOutput<T> out;
  out.mask = fusion::MaskDecision::none(0, 0);
  const auto im = encoders::encode_image(ps, "encoder.image", constant_of<T>({3, n, n}, image),
                                         spec_.image_encoder());
  const auto pt = encoders::encode_points(ps, "encoder.points",
                                          constant_of<T>({kNumPoints, 3}, points),
                                          spec_.point_encoder());
  out.image_local = im.local;
  out.point_local = pt.local;
  const auto pq = linear(ps, "fusion.df.in_points", pt.local);
  const auto iq = linear(ps, "fusion.df.in_image", im.local);
  const auto x = cross_attention_block(ps, "fusion.df.cross", pq, iq, spec_.ftm.heads);
  out.pose = linear(ps, "fusion.df.head", concat<T>({mean_rows(x), pt.global, im.global}, 1));

  // Meshes come from skinning the regressed parameters and carry no gradient.
  const std::vector<float> params(out.pose.data().begin(), out.pose.data().end());
  const auto skinned = bodysim::skin(*body_, bodysim::Pose::from_params(params));
  out.joints = constant_of<T>({kNumJoints, 3}, skinned.joints);
  out.verts_full = constant_of<T>({body_->num_full(), 3}, skinned.verts);
  out.verts_coarse = constant_of<T>({body_->num_coarse(), 3}, body_->to_coarse(skinned.verts));
  return out;
}

template <typename T>
ModelOutput<T> Model::forward_tokenfusion(const ParamSet<T>& ps, std::span<const float> points,
                                          std::span<const float> image,
                                          const ForwardOptions& opts) const {
  const std::size_t n = spec_.scale.image_size;
  const std::size_t q = body_->query_tokens();
  ModelOutput<T> out;
  out.mask = fusion::MaskDecision::none(kGridTokens, kNumSeeds);
  const auto im = encoders::encode_image(ps, "encoder.image", constant_of<T>({3, n, n}, image),
                                         spec_.image_encoder());
  const auto pt = encoders::encode_points(ps, "encoder.points",
                                          constant_of<T>({kNumPoints, 3}, points),
                                          spec_.point_encoder());
  out.image_local = im.local;
  out.point_local = pt.local;
  const auto coords = constant_of<T>({q, 3}, body_->template_coords);

  auto stream_input = [&](const std::string& p, const Tensor<T>& g, const Tensor<T>& local) {
    return concat<T>({mlp(ps, p + ".in_query", fusion::positional_encode(g, coords)),
                      linear(ps, p + ".in_local", local)},
                     0);
  };
  Tensor<T> xi = stream_input("fusion.tf.image", im.global, im.local);
  Tensor<T> xp = stream_input("fusion.tf.points", pt.global, pt.local);
  out.query_tokens = fusion::positional_encode(affine_scalar(add(im.global, pt.global), T(0.5)),
                                               coords);

  Tensor<T> avg;
  for (std::size_t l = 0; l < spec_.ftm.depth; ++l) {
    const std::string ls = std::to_string(l);
    xi = transformer_block(ps, "fusion.tf.image.block" + ls, xi, spec_.ftm.heads, opts.trace);
    xp = transformer_block(ps, "fusion.tf.points.block" + ls, xp, spec_.ftm.heads, opts.trace);
    auto qi = slice(xi, 0, 0, q);
    auto qp = slice(xp, 0, 0, q);
    avg = affine_scalar(add(qi, qp), T(0.5));
    const auto normed = layer_norm(ps, "fusion.tf.head_norm" + ls, avg);
    out.layer_preds.push_back(add(coords, linear(ps, "fusion.tf.head" + ls, normed)));
    if (l + 1 == spec_.ftm.depth) break;
    // Soft substitution: each stream keeps a learned share of its own query
    // token and takes the rest from the other stream.
    const auto si = sigmoid(linear(ps, "fusion.tf.image.score" + ls, qi));
    const auto sp = sigmoid(linear(ps, "fusion.tf.points.score" + ls, qp));
    const auto new_qi = add(qp, scale_rows(sub(qi, qp), si));
    const auto new_qp = add(qi, scale_rows(sub(qp, qi), sp));
    xi = concat<T>({new_qi, slice(xi, 0, q, xi.dim(0))}, 0);
    xp = concat<T>({new_qp, slice(xp, 0, q, xp.dim(0))}, 0);
  }
  decode(ps, "fusion", avg, out);
  return out;
}

#define IMMF_INSTANTIATE_MODEL(T)                                                            \
  template ModelOutput<T> Model::forward(const ParamSet<T>&, std::span<const float>,         \
                                         std::span<const float>, const ForwardOptions&) const;

IMMF_INSTANTIATE_MODEL(float)
IMMF_INSTANTIATE_MODEL(double)

#undef IMMF_INSTANTIATE_MODEL

}  // namespace immf::trainer
