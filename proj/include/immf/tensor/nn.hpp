#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "immf/common/rng.hpp"
#include "immf/tensor/ops.hpp"
#include "immf/tensor/tensor.hpp"

namespace immf::tensor {

/// Named trainable arrays. Names are dotted paths ("fusion.ftm.block0.attn.q.weight");
/// iteration order is lexicographic, which fixes the checkpoint layout.
template <typename T>
class ParamSet {
 public:
  void add(const std::string& name, Tensor<T> value);
  const Tensor<T>& at(const std::string& name) const;
  Tensor<T>& at(const std::string& name);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  void zero_grad();

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  /// Fresh leaves holding the same values in precision U.
  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [name, t] : params_) out.add(name, cast_leaf<U>(t));
    return out;
  }

  /// Bitwise equality of names, shapes and values.
  bool same_values(const ParamSet& other) const;

 private:
  std::map<std::string, Tensor<T>> params_;
};

/// Creates parameters with a fixed, seeded initialization scheme.
class Initializer {
 public:
  Initializer(ParamSet<float>& params, Rng& rng) : params_(params), rng_(rng) {}

  /// name.weight [in, out] (uniform Glorot, times `gain`) and name.bias [out] (zeros).
  void linear(const std::string& name, std::size_t in, std::size_t out, double gain = 1.0);
  void layer_norm(const std::string& name, std::size_t dim);
  /// name.weight [o, c, kh, kw] (uniform He) and name.bias [o].
  void conv(const std::string& name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel);
  void mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
           double out_gain = 1.0);
  void attention(const std::string& name, std::size_t dim);
  void transformer_block(const std::string& name, std::size_t dim, std::size_t ff_dim);
  void cross_attention_block(const std::string& name, std::size_t dim, std::size_t ff_dim);
  void tensor(const std::string& name, Shape shape, std::vector<float> values);

  Rng& rng() { return rng_; }

 private:
  ParamSet<float>& params_;
  Rng& rng_;
};

/// Row-stochastic attention maps recorded during a forward pass, one entry
/// per head per attention call.
struct AttentionTrace {
  struct Map {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;
  };
  std::vector<Map> maps;
};

template <typename T>
Tensor<T> linear(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x);
template <typename T>
Tensor<T> layer_norm(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x);
/// linear -> gelu -> linear
template <typename T>
Tensor<T> mlp(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x);

/// Multi-head scaled dot-product attention. Queries come from `q_in` [n, d],
/// keys and values from `kv_in` [m, d].
template <typename T>
Tensor<T> multi_head_attention(const ParamSet<T>& ps, const std::string& name,
                               const Tensor<T>& q_in, const Tensor<T>& kv_in, std::size_t heads,
                               AttentionTrace* trace = nullptr);

/// Pre-norm block: x + MHA(LN(x)), then + FF(LN(.)).
template <typename T>
Tensor<T> transformer_block(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x,
                            std::size_t heads, AttentionTrace* trace = nullptr);

/// Pre-norm cross-attention block: q + MHA(LN(q), LN(kv)), then + FF(LN(.)).
template <typename T>
Tensor<T> cross_attention_block(const ParamSet<T>& ps, const std::string& name,
                                const Tensor<T>& q, const Tensor<T>& kv, std::size_t heads,
                                AttentionTrace* trace = nullptr);

}  // namespace immf::tensor
