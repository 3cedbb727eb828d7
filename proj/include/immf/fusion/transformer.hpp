#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "immf/tensor/nn.hpp"

namespace immf::fusion {

using tensor::ParamSet;
using tensor::Tensor;

struct FtmConfig {
  std::size_t depth = 3;
  std::size_t heads = 4;
  std::size_t hidden = 64;
  std::size_t ff = 128;
};

template <typename T>
struct FtmOutput {
  Tensor<T> queries;       // [Q, hidden]
  Tensor<T> image_local;   // [49, hidden] or undefined
  Tensor<T> point_local;   // [32, hidden] or undefined
  std::vector<Tensor<T>> layer_preds;  // depth x [Q, 3]
};

/// Which local token sets the module is built for.
struct FtmInputs {
  std::size_t token_dim = 67;  // 3 + D for every role
  bool image = true;
  bool points = true;
  /// Rows of the learned per-query embedding added after the input lift
  /// (0: none).
  std::size_t queries = 0;
};

void init_ftm(tensor::Initializer& init, const std::string& prefix, const FtmConfig& cfg,
              const FtmInputs& inputs);

/// Projects each role to the hidden width, runs `depth` pre-norm blocks of
/// self-attention over [queries; image tokens; point tokens], and after each
/// block predicts coarse coordinates as template_coords + head_l(LN_l(queries)).
/// Missing local sets are passed as undefined tensors.
template <typename T>
FtmOutput<T> fusion_transformer(const ParamSet<T>& ps, const std::string& prefix,
                                const Tensor<T>& query_tokens, const Tensor<T>& image_local,
                                const Tensor<T>& point_local, const Tensor<T>& template_coords,
                                const FtmConfig& cfg, tensor::AttentionTrace* trace = nullptr);

}  // namespace immf::fusion
