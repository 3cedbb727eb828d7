#include "immf/fusion/transformer.hpp"

#include "immf/common/error.hpp"

namespace immf::fusion {

using namespace immf::tensor;

void init_ftm(Initializer& init, const std::string& prefix, const FtmConfig& cfg,
              const FtmInputs& inputs) {
  if (cfg.depth == 0 || cfg.heads == 0 || cfg.hidden % cfg.heads != 0)
    throw ValidationError("ftm: depth and heads must be positive and divide the hidden width");
  // Queries differ only by their 3 template coordinates, so they get a
  // two-layer lift; local tokens get a linear projection.
  init.mlp(prefix + ".in_query", inputs.token_dim, cfg.hidden, cfg.hidden);
  if (inputs.queries > 0) {
    std::vector<float> e(inputs.queries * cfg.hidden);
    for (auto& v : e) v = static_cast<float>(init.rng().normal());
    init.tensor(prefix + ".query_embed", {inputs.queries, cfg.hidden}, std::move(e));
  }
  if (inputs.image) init.linear(prefix + ".in_image", inputs.token_dim, cfg.hidden);
  if (inputs.points) init.linear(prefix + ".in_points", inputs.token_dim, cfg.hidden);
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    const std::string b = prefix + ".block" + std::to_string(l);
    init.transformer_block(b, cfg.hidden, cfg.ff);
    init.layer_norm(prefix + ".head_norm" + std::to_string(l), cfg.hidden);
    init.linear(prefix + ".head" + std::to_string(l), cfg.hidden, 3, 0.1);
  }
}

template <typename T>
FtmOutput<T> fusion_transformer(const ParamSet<T>& ps, const std::string& prefix,
                                const Tensor<T>& query_tokens, const Tensor<T>& image_local,
                                const Tensor<T>& point_local, const Tensor<T>& template_coords,
                                const FtmConfig& cfg, AttentionTrace* trace) {
  const std::size_t q = query_tokens.dim(0);
  if (template_coords.shape() != Shape{q, 3})
    throw ShapeError("ftm: template coordinates must be [" + std::to_string(q) + ", 3]");
  const std::size_t width = query_tokens.dim(1);
  auto check = [&](const Tensor<T>& t, const char* what) {
    if (t.defined() && (t.rank() != 2 || t.dim(1) != width))
      throw ShapeError(std::string("ftm: ") + what + " tokens have shape " + shape_str(t.shape()) +
                       ", expected [*, " + std::to_string(width) + "]");
  };
  check(image_local, "image");
  check(point_local, "point");

  Tensor<T> lifted = mlp(ps, prefix + ".in_query", query_tokens);
  if (ps.contains(prefix + ".query_embed")) {
    const auto& e = ps.at(prefix + ".query_embed");
    if (e.shape() != Shape{q, cfg.hidden})
      throw ShapeError("ftm: query embedding is " + shape_str(e.shape()) + " for " +
                       std::to_string(q) + " queries");
    lifted = add(lifted, e);
  }
  std::vector<Tensor<T>> parts = {lifted};
  if (image_local.defined()) parts.push_back(linear(ps, prefix + ".in_image", image_local));
  if (point_local.defined()) parts.push_back(linear(ps, prefix + ".in_points", point_local));
  Tensor<T> x = parts.size() == 1 ? parts.front() : concat(parts, 0);

  FtmOutput<T> out;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    x = transformer_block(ps, prefix + ".block" + std::to_string(l), x, cfg.heads, trace);
    const auto qx = parts.size() == 1 ? x : slice(x, 0, 0, q);
    const auto normed = layer_norm(ps, prefix + ".head_norm" + std::to_string(l), qx);
    out.layer_preds.push_back(
        add(template_coords, linear(ps, prefix + ".head" + std::to_string(l), normed)));
  }
  out.queries = parts.size() == 1 ? x : slice(x, 0, 0, q);
  std::size_t offset = q;
  if (image_local.defined()) {
    out.image_local = slice(x, 0, offset, offset + image_local.dim(0));
    offset += image_local.dim(0);
  }
  if (point_local.defined()) out.point_local = slice(x, 0, offset, offset + point_local.dim(0));
  return out;
}

template FtmOutput<float> fusion_transformer(const ParamSet<float>&, const std::string&,
                                             const Tensor<float>&, const Tensor<float>&,
                                             const Tensor<float>&, const Tensor<float>&,
                                             const FtmConfig&, AttentionTrace*);
template FtmOutput<double> fusion_transformer(const ParamSet<double>&, const std::string&,
                                              const Tensor<double>&, const Tensor<double>&,
                                              const Tensor<double>&, const Tensor<double>&,
                                              const FtmConfig&, AttentionTrace*);

}  // namespace immf::fusion
