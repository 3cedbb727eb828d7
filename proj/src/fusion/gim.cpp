#include "immf/fusion/gim.hpp"

#include "immf/common/error.hpp"

namespace immf::fusion {

using namespace immf::tensor;

constexpr std::size_t kGimHeads = 4;

void init_gim(Initializer& init, const std::string& prefix, std::size_t dim) {
  init.transformer_block(prefix, dim, 2 * dim);
}

template <typename T>
Tensor<T> gim(const ParamSet<T>& ps, const std::string& prefix, const Tensor<T>& g_im,
              const Tensor<T>& g_pc, AttentionTrace* trace) {
  if (g_im.shape() != g_pc.shape() || g_im.rank() != 2 || g_im.dim(0) != 1)
    throw ShapeError("gim: expected two [1, D] vectors, got " + shape_str(g_im.shape()) + " and " +
                     shape_str(g_pc.shape()));
  const std::size_t heads = g_im.dim(1) % kGimHeads == 0 ? kGimHeads : 1;
  return mean_rows(transformer_block(ps, prefix, concat<T>({g_im, g_pc}, 0), heads, trace));
}

template <typename T>
Tensor<T> positional_encode(const Tensor<T>& g, const Tensor<T>& template_coords) {
  if (g.rank() != 2 || g.dim(0) != 1) throw ShapeError("positional_encode: G must be [1, D]");
  if (template_coords.rank() != 2 || template_coords.dim(1) != 3)
    throw ShapeError("positional_encode: template coordinates must be [Q, 3]");
  return concat<T>({template_coords, repeat_rows(g, template_coords.dim(0))}, 1);
}

template Tensor<float> gim(const ParamSet<float>&, const std::string&, const Tensor<float>&,
                           const Tensor<float>&, AttentionTrace*);
template Tensor<double> gim(const ParamSet<double>&, const std::string&, const Tensor<double>&,
                            const Tensor<double>&, AttentionTrace*);
template Tensor<float> positional_encode(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> positional_encode(const Tensor<double>&, const Tensor<double>&);

}  // namespace immf::fusion
