#pragma once

#include <cstddef>
#include <string>

#include "immf/encoders/sampling.hpp"
#include "immf/tensor/nn.hpp"

namespace immf::encoders {

using tensor::ParamSet;
using tensor::Tensor;

struct PointEncoderConfig {
  std::size_t feature_dim = 64;
  std::size_t hidden = 64;
  std::size_t seeds = 32;
  double radius = 0.3;
  std::size_t max_group = 32;
  std::size_t decoration_dim = 0;  // extra per-point channels (rgb, image features)
};

template <typename T>
struct PointTokens {
  Tensor<T> local;   // L_pc [seeds, 3 + D]: seed coordinates then cluster features
  Tensor<T> global;  // G_pc [1, D]
};

void init_point_encoder(tensor::Initializer& init, const std::string& prefix,
                        const PointEncoderConfig& cfg);

/// cloud [1024, 3] is data (no gradient); `decoration` [1024, decoration_dim]
/// may be undefined when decoration_dim == 0 and may carry gradient.
/// The shared MLP sees each neighbour's offset from its seed plus its decoration.
template <typename T>
PointTokens<T> encode_points(const ParamSet<T>& ps, const std::string& prefix,
                             const Tensor<T>& cloud, const Tensor<T>& decoration,
                             const Grouping& grouping, const PointEncoderConfig& cfg);

/// Convenience overload that computes the grouping.
template <typename T>
PointTokens<T> encode_points(const ParamSet<T>& ps, const std::string& prefix,
                             const Tensor<T>& cloud, const PointEncoderConfig& cfg);

}  // namespace immf::encoders
