#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "immf/tensor/nn.hpp"

namespace immf::encoders {

using tensor::ParamSet;
using tensor::Tensor;

/// Stride-2 2x2 convolutions halve the image until it is 7x7, so the image
/// size must be 7 * 2^k with k >= 1.
struct ImageEncoderConfig {
  std::size_t image_size = 56;
  std::size_t feature_dim = 64;

  std::size_t stages() const;
  /// Output channels of every stage; the last is feature_dim.
  std::vector<std::size_t> channels() const;
};

template <typename T>
struct ImageTokens {
  Tensor<T> local;     // L_im [49, D + 3]: grid features then (u, v, 0)
  Tensor<T> global;    // G_im [1, D]
  Tensor<T> features;  // [49, D] grid features alone, row = y * 7 + x
};

void init_image_encoder(tensor::Initializer& init, const std::string& prefix,
                        const ImageEncoderConfig& cfg);

template <typename T>
ImageTokens<T> encode_image(const ParamSet<T>& ps, const std::string& prefix,
                            const Tensor<T>& image, const ImageEncoderConfig& cfg);

/// Normalized grid-cell centers, [49, 3] with a zero third column.
std::vector<float> grid_positions();

}  // namespace immf::encoders
