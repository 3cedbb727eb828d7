#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "immf/tensor/nn.hpp"

namespace immf::fusion {

using tensor::ParamSet;
using tensor::Tensor;

struct DecoderConfig {
  std::size_t in_dim = 64;
  std::size_t hidden = 32;
};

void init_graph_decoder(tensor::Initializer& init, const std::string& prefix,
                        const DecoderConfig& cfg);

/// Two graph-convolution layers, A X W + b, widths in_dim -> hidden -> 3, with a
/// GELU between them. The result is an offset added to `template_coords`
/// (any per-row base; the model passes its last coarse prediction).
/// Returns [Q, 3]; rows 0..21 are joints, the rest coarse vertices.
template <typename T>
Tensor<T> graph_conv_decode(const ParamSet<T>& ps, const std::string& prefix,
                            const Tensor<T>& queries, const Tensor<T>& adjacency,
                            const Tensor<T>& template_coords);

/// Learned [V_full, V_coarse] matrix, initialized from the barycentric upsampler.
void init_upsampler(tensor::Initializer& init, const std::string& prefix, std::size_t v_full,
                    std::size_t v_coarse, std::vector<float> dense_upsample);

/// verts_full = U * verts_coarse, per coordinate channel.
template <typename T>
Tensor<T> upsample_mesh(const ParamSet<T>& ps, const std::string& prefix,
                        const Tensor<T>& verts_coarse);

}  // namespace immf::fusion
