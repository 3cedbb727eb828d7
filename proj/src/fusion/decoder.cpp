#include "immf/fusion/decoder.hpp"

#include "immf/common/error.hpp"

namespace immf::fusion {

using namespace immf::tensor;

void init_graph_decoder(Initializer& init, const std::string& prefix, const DecoderConfig& cfg) {
  init.linear(prefix + ".gc1", cfg.in_dim, cfg.hidden);
  init.linear(prefix + ".gc2", cfg.hidden, 3, 0.1);
}

template <typename T>
Tensor<T> graph_conv_decode(const ParamSet<T>& ps, const std::string& prefix,
                            const Tensor<T>& queries, const Tensor<T>& adjacency,
                            const Tensor<T>& template_coords) {
  const std::size_t q = queries.dim(0);
  if (adjacency.shape() != Shape{q, q})
    throw ShapeError("graph_conv_decode: adjacency must be [" + std::to_string(q) + ", " +
                     std::to_string(q) + "], got " + shape_str(adjacency.shape()));
  auto gc = [&](const std::string& name, const Tensor<T>& x) {
    return add_bias(matmul(adjacency, matmul(x, ps.at(name + ".weight"))), ps.at(name + ".bias"));
  };
  const auto h = gelu(gc(prefix + ".gc1", queries));
  return add(template_coords, gc(prefix + ".gc2", h));
}

void init_upsampler(Initializer& init, const std::string& prefix, std::size_t v_full,
                    std::size_t v_coarse, std::vector<float> dense_upsample) {
  if (dense_upsample.size() != v_full * v_coarse)
    throw ShapeError("upsampler: initial matrix has the wrong size");
  init.tensor(prefix + ".matrix", {v_full, v_coarse}, std::move(dense_upsample));
}

template <typename T>
Tensor<T> upsample_mesh(const ParamSet<T>& ps, const std::string& prefix,
                        const Tensor<T>& verts_coarse) {
  return matmul(ps.at(prefix + ".matrix"), verts_coarse);
}

template Tensor<float> graph_conv_decode(const ParamSet<float>&, const std::string&,
                                         const Tensor<float>&, const Tensor<float>&,
                                         const Tensor<float>&);
template Tensor<double> graph_conv_decode(const ParamSet<double>&, const std::string&,
                                          const Tensor<double>&, const Tensor<double>&,
                                          const Tensor<double>&);
template Tensor<float> upsample_mesh(const ParamSet<float>&, const std::string&,
                                     const Tensor<float>&);
template Tensor<double> upsample_mesh(const ParamSet<double>&, const std::string&,
                                      const Tensor<double>&);

}  // namespace immf::fusion
