#include "immf/encoders/point_encoder.hpp"

#include <vector>

#include "immf/common/error.hpp"
#include "immf/common/scale.hpp"

namespace immf::encoders {

using namespace immf::tensor;

void init_point_encoder(Initializer& init, const std::string& prefix,
                        const PointEncoderConfig& cfg) {
  init.linear(prefix + ".fc1", 3 + cfg.decoration_dim, cfg.hidden);
  init.linear(prefix + ".fc2", cfg.hidden, cfg.feature_dim);
  init.mlp(prefix + ".global", cfg.feature_dim + 3, 2 * cfg.feature_dim, cfg.feature_dim);
}

namespace {

template <typename T>
void check_cloud(const Tensor<T>& cloud) {
  if (cloud.rank() != 2 || cloud.dim(0) != kNumPoints || cloud.dim(1) != 3)
    throw ShapeError("encode_points: expected cloud [1024, 3], got " + shape_str(cloud.shape()));
}

}  // namespace

template <typename T>
PointTokens<T> encode_points(const ParamSet<T>& ps, const std::string& prefix,
                             const Tensor<T>& cloud, const Tensor<T>& decoration,
                             const Grouping& grouping, const PointEncoderConfig& cfg) {
  check_cloud(cloud);
  if (cfg.decoration_dim > 0 &&
      (!decoration.defined() || decoration.shape() != Shape{kNumPoints, cfg.decoration_dim}))
    throw ShapeError("encode_points: expected decoration [1024, " +
                     std::to_string(cfg.decoration_dim) + "]");
  if (grouping.seeds.size() != cfg.seeds)
    throw ShapeError("encode_points: grouping has " + std::to_string(grouping.seeds.size()) +
                     " seeds, expected " + std::to_string(cfg.seeds));

  const auto pts = cloud.data();
  const std::size_t m = grouping.members.size();
  std::vector<T> offsets(m * 3);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = grouping.members[r], s = grouping.seeds[grouping.segment[r]];
    for (std::size_t a = 0; a < 3; ++a) offsets[3 * r + a] = pts[3 * i + a] - pts[3 * s + a];
  }
  Tensor<T> input = Tensor<T>::constant({m, 3}, std::move(offsets));
  if (cfg.decoration_dim > 0)
    input = concat<T>({input, gather_rows(decoration, grouping.members)}, 1);

  const auto h = gelu(linear(ps, prefix + ".fc2", gelu(linear(ps, prefix + ".fc1", input))));
  const auto feats = segment_max(h, grouping.segment, cfg.seeds);
  const auto seed_xyz = gather_rows(cloud, grouping.seeds);

  const std::vector<std::size_t> one_segment(cfg.seeds, 0);
  const auto pooled = segment_max(feats, one_segment, 1);
  const auto global = mlp(ps, prefix + ".global", concat<T>({pooled, mean_rows(seed_xyz)}, 1));
  return {concat<T>({seed_xyz, feats}, 1), global};
}

template <typename T>
PointTokens<T> encode_points(const ParamSet<T>& ps, const std::string& prefix,
                             const Tensor<T>& cloud, const PointEncoderConfig& cfg) {
  check_cloud(cloud);
  std::vector<float> pts(cloud.data().begin(), cloud.data().end());
  const auto grouping = make_grouping(pts, cfg.seeds, cfg.radius, cfg.max_group);
  return encode_points(ps, prefix, cloud, Tensor<T>(), grouping, cfg);
}

template PointTokens<float> encode_points(const ParamSet<float>&, const std::string&,
                                          const Tensor<float>&, const Tensor<float>&,
                                          const Grouping&, const PointEncoderConfig&);
template PointTokens<double> encode_points(const ParamSet<double>&, const std::string&,
                                           const Tensor<double>&, const Tensor<double>&,
                                           const Grouping&, const PointEncoderConfig&);
template PointTokens<float> encode_points(const ParamSet<float>&, const std::string&,
                                          const Tensor<float>&, const PointEncoderConfig&);
template PointTokens<double> encode_points(const ParamSet<double>&, const std::string&,
                                           const Tensor<double>&, const PointEncoderConfig&);

}  // namespace immf::encoders
