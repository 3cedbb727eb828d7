#include "immf/tensor/nn.hpp"

#include <cmath>
#include <cstring>

#include "immf/common/error.hpp"

namespace immf::tensor {

template <typename T>
void ParamSet<T>::add(const std::string& name, Tensor<T> value) {
  if (!params_.emplace(name, std::move(value)).second)
    throw ValidationError("duplicate parameter '" + name + "'");
}

template <typename T>
const Tensor<T>& ParamSet<T>::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("missing parameter '" + name + "'");
  return it->second;
}

template <typename T>
Tensor<T>& ParamSet<T>::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("missing parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t ParamSet<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

template <typename T>
void ParamSet<T>::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

template <typename T>
bool ParamSet<T>::same_values(const ParamSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto it = other.params_.begin();
  for (const auto& [name, t] : params_) {
    if (name != it->first || t.shape() != it->second.shape()) return false;
    if (std::memcmp(t.data().data(), it->second.data().data(), t.size() * sizeof(T)) != 0)
      return false;
    ++it;
  }
  return true;
}

template class ParamSet<float>;
template class ParamSet<double>;

void Initializer::tensor(const std::string& name, Shape shape, std::vector<float> values) {
  params_.add(name, Tensor<float>::parameter(std::move(shape), std::move(values)));
}

void Initializer::linear(const std::string& name, std::size_t in, std::size_t out, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<float> w(in * out);
  for (auto& v : w) v = static_cast<float>(rng_.uniform(-bound, bound));
  tensor(name + ".weight", {in, out}, std::move(w));
  tensor(name + ".bias", {out}, std::vector<float>(out, 0.0f));
}

void Initializer::layer_norm(const std::string& name, std::size_t dim) {
  tensor(name + ".gain", {dim}, std::vector<float>(dim, 1.0f));
  tensor(name + ".bias", {dim}, std::vector<float>(dim, 0.0f));
}

void Initializer::conv(const std::string& name, std::size_t in_ch, std::size_t out_ch,
                       std::size_t kernel) {
  const std::size_t fan_in = in_ch * kernel * kernel;
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<float> w(out_ch * fan_in);
  for (auto& v : w) v = static_cast<float>(rng_.uniform(-bound, bound));
  tensor(name + ".weight", {out_ch, in_ch, kernel, kernel}, std::move(w));
  std::vector<float> b(out_ch);
  for (auto& v : b) v = static_cast<float>(rng_.uniform(-0.1, 0.1));
  tensor(name + ".bias", {out_ch}, std::move(b));
}

void Initializer::mlp(const std::string& name, std::size_t in, std::size_t hidden,
                      std::size_t out, double out_gain) {
  linear(name + ".fc1", in, hidden);
  linear(name + ".fc2", hidden, out, out_gain);
}

void Initializer::attention(const std::string& name, std::size_t dim) {
  linear(name + ".q", dim, dim);
  linear(name + ".k", dim, dim);
  linear(name + ".v", dim, dim);
  linear(name + ".o", dim, dim, 0.5);
}

void Initializer::transformer_block(const std::string& name, std::size_t dim,
                                    std::size_t ff_dim) {
  layer_norm(name + ".ln1", dim);
  attention(name + ".attn", dim);
  layer_norm(name + ".ln2", dim);
  mlp(name + ".ff", dim, ff_dim, dim, 0.5);
}

void Initializer::cross_attention_block(const std::string& name, std::size_t dim,
                                        std::size_t ff_dim) {
  layer_norm(name + ".ln_kv", dim);
  transformer_block(name, dim, ff_dim);
}

template <typename T>
Tensor<T> linear(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x) {
  return add_bias(matmul(x, ps.at(name + ".weight")), ps.at(name + ".bias"));
}

template <typename T>
Tensor<T> layer_norm(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x) {
  return layer_norm(x, ps.at(name + ".gain"), ps.at(name + ".bias"));
}

template <typename T>
Tensor<T> mlp(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x) {
  return linear(ps, name + ".fc2", gelu(linear(ps, name + ".fc1", x)));
}

template <typename T>
Tensor<T> multi_head_attention(const ParamSet<T>& ps, const std::string& name,
                               const Tensor<T>& q_in, const Tensor<T>& kv_in, std::size_t heads,
                               AttentionTrace* trace) {
  const std::size_t dim = q_in.dim(1);
  if (heads == 0 || dim % heads != 0)
    throw ShapeError(name + ": model dim " + std::to_string(dim) + " not divisible by " +
                     std::to_string(heads) + " heads");
  const std::size_t head_dim = dim / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  const auto q = linear(ps, name + ".q", q_in);
  const auto k = linear(ps, name + ".k", kv_in);
  const auto v = linear(ps, name + ".v", kv_in);
  std::vector<Tensor<T>> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    const auto qh = slice(q, 1, lo, hi);
    const auto kh = slice(k, 1, lo, hi);
    const auto vh = slice(v, 1, lo, hi);
    const auto weights = softmax(affine_scalar(matmul(qh, transpose(kh)), scale), 1);
    if (trace) {
      trace->maps.push_back({name + ".head" + std::to_string(h), weights.dim(0), weights.dim(1),
                             std::vector<double>(weights.data().begin(), weights.data().end())});
    }
    outs.push_back(matmul(weights, vh));
  }
  return linear(ps, name + ".o", heads == 1 ? outs.front() : concat(outs, 1));
}

template <typename T>
Tensor<T> transformer_block(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x,
                            std::size_t heads, AttentionTrace* trace) {
  const auto normed = layer_norm(ps, name + ".ln1", x);
  const auto h = add(x, multi_head_attention(ps, name + ".attn", normed, normed, heads, trace));
  return add(h, mlp(ps, name + ".ff", layer_norm(ps, name + ".ln2", h)));
}

template <typename T>
Tensor<T> cross_attention_block(const ParamSet<T>& ps, const std::string& name,
                                const Tensor<T>& q, const Tensor<T>& kv, std::size_t heads,
                                AttentionTrace* trace) {
  const auto qn = layer_norm(ps, name + ".ln1", q);
  const auto kvn = layer_norm(ps, name + ".ln_kv", kv);
  const auto h = add(q, multi_head_attention(ps, name + ".attn", qn, kvn, heads, trace));
  return add(h, mlp(ps, name + ".ff", layer_norm(ps, name + ".ln2", h)));
}

#define IMMF_INSTANTIATE_NN(T)                                                                  \
  template Tensor<T> linear(const ParamSet<T>&, const std::string&, const Tensor<T>&);          \
  template Tensor<T> layer_norm(const ParamSet<T>&, const std::string&, const Tensor<T>&);      \
  template Tensor<T> mlp(const ParamSet<T>&, const std::string&, const Tensor<T>&);             \
  template Tensor<T> multi_head_attention(const ParamSet<T>&, const std::string&,               \
                                          const Tensor<T>&, const Tensor<T>&, std::size_t,      \
                                          AttentionTrace*);                                     \
  template Tensor<T> transformer_block(const ParamSet<T>&, const std::string&, const Tensor<T>&, \
                                       std::size_t, AttentionTrace*);                           \
  template Tensor<T> cross_attention_block(const ParamSet<T>&, const std::string&,              \
                                           const Tensor<T>&, const Tensor<T>&, std::size_t,     \
                                           AttentionTrace*);

IMMF_INSTANTIATE_NN(float)
IMMF_INSTANTIATE_NN(double)

#undef IMMF_INSTANTIATE_NN

}  // namespace immf::tensor
