#include "immf/fusion/mmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "immf/common/error.hpp"
#include "immf/tensor/ops.hpp"

namespace immf::fusion {

using namespace immf::tensor;

std::string to_string(Modality m) {
  switch (m) {
    case Modality::none: return "none";
    case Modality::image: return "image";
    case Modality::points: return "points";
  }
  return "?";
}

double MaskDecision::token_fraction() const {
  if (token_mask.empty()) return 0.0;
  const auto n = std::count(token_mask.begin(), token_mask.end(), true);
  return static_cast<double>(n) / static_cast<double>(token_mask.size());
}

MaskDecision MaskDecision::none(std::size_t n_image, std::size_t n_points) {
  return {Modality::none, std::vector<bool>(n_image + n_points, false)};
}

MaskDecision MaskDecision::force(Modality m, std::size_t n_image, std::size_t n_points) {
  return {m, std::vector<bool>(n_image + n_points, false)};
}

MaskDecision draw_mask(Rng& rng, const MmmConfig& cfg, bool training, const MaskLayout& layout) {
  const std::size_t n_image = layout.image_tokens, n_points = layout.point_tokens;
  if (!(cfg.p_mod >= 0 && cfg.p_mod <= 1) ||
      !(cfg.max_token_fraction >= 0 && cfg.max_token_fraction <= 1))
    throw ValidationError("mmm: p_mod and max_token_fraction must lie in [0,1]");
  auto d = MaskDecision::none(n_image, n_points);
  if (!training) return d;

  // A model with a single modality never loses it.
  if (layout.image && layout.points && rng.bernoulli(cfg.p_mod))
    d.modality_masked = rng.bernoulli(0.5) ? Modality::image : Modality::points;

  std::vector<std::size_t> candidates;
  if (d.modality_masked != Modality::image)
    for (std::size_t i = 0; i < n_image; ++i) candidates.push_back(i);
  if (d.modality_masked != Modality::points)
    for (std::size_t i = 0; i < n_points; ++i) candidates.push_back(n_image + i);
  const double frac = rng.uniform(0.0, cfg.max_token_fraction);
  const auto count = static_cast<std::size_t>(std::floor(frac * static_cast<double>(candidates.size())));
  // Partial Fisher-Yates: the first `count` entries become a uniform subset.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
    d.token_mask[candidates[i]] = true;
  }
  return d;
}

template <typename T>
LocalTokens<T> apply_mask(const LocalTokens<T>& tokens, const MaskDecision& decision) {
  const std::size_t ni = tokens.image_local.defined() ? tokens.image_local.dim(0) : 0;
  const std::size_t np = tokens.point_local.defined() ? tokens.point_local.dim(0) : 0;
  if (decision.token_mask.size() != ni + np)
    throw ShapeError("mmm: mask covers " + std::to_string(decision.token_mask.size()) +
                     " tokens, expected " + std::to_string(ni + np));
  LocalTokens<T> out = tokens;
  auto zero_all = [](const Tensor<T>& t) { return Tensor<T>::zeros(t.shape()); };
  auto mask_part = [&](const Tensor<T>& t, std::size_t offset, std::size_t n) {
    std::vector<bool> keep(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      keep[i] = !decision.token_mask[offset + i];
      any = any || !keep[i];
    }
    return any ? mask_rows(t, keep) : t;
  };
  if (decision.modality_masked == Modality::image) {
    if (ni > 0) out.image_local = zero_all(tokens.image_local);
    if (tokens.image_global.defined()) out.image_global = zero_all(tokens.image_global);
  } else if (ni > 0) {
    out.image_local = mask_part(tokens.image_local, 0, ni);
  }
  if (decision.modality_masked == Modality::points) {
    if (np > 0) out.point_local = zero_all(tokens.point_local);
    if (tokens.point_global.defined()) out.point_global = zero_all(tokens.point_global);
  } else if (np > 0) {
    out.point_local = mask_part(tokens.point_local, ni, np);
  }
  return out;
}

template LocalTokens<float> apply_mask(const LocalTokens<float>&, const MaskDecision&);
template LocalTokens<double> apply_mask(const LocalTokens<double>&, const MaskDecision&);

}  // namespace immf::fusion
