#include "immf/encoders/image_encoder.hpp"

#include <algorithm>

#include "immf/common/error.hpp"
#include "immf/common/scale.hpp"

namespace immf::encoders {

using namespace immf::tensor;

std::size_t ImageEncoderConfig::stages() const {
  std::size_t n = image_size, k = 0;
  while (n > kGridSide && n % 2 == 0) {
    n /= 2;
    ++k;
  }
  if (n != kGridSide || k == 0)
    throw ValidationError("image size " + std::to_string(image_size) +
                          " is not 7 * 2^k for k >= 1");
  return k;
}

std::vector<std::size_t> ImageEncoderConfig::channels() const {
  const std::size_t k = stages();
  std::vector<std::size_t> ch(k);
  for (std::size_t i = 0; i + 1 < k; ++i) ch[i] = std::min<std::size_t>(16u << i, feature_dim);
  ch[k - 1] = feature_dim;
  return ch;
}

std::vector<float> grid_positions() {
  std::vector<float> pos;
  pos.reserve(kGridTokens * 3);
  for (std::size_t y = 0; y < kGridSide; ++y)
    for (std::size_t x = 0; x < kGridSide; ++x) {
      pos.push_back((static_cast<float>(x) + 0.5f) / static_cast<float>(kGridSide));
      pos.push_back((static_cast<float>(y) + 0.5f) / static_cast<float>(kGridSide));
      pos.push_back(0.0f);
    }
  return pos;
}

void init_image_encoder(Initializer& init, const std::string& prefix,
                        const ImageEncoderConfig& cfg) {
  std::size_t in = 3;
  const auto ch = cfg.channels();
  for (std::size_t i = 0; i < ch.size(); ++i) {
    init.conv(prefix + ".conv" + std::to_string(i), in, ch[i], 2);
    in = ch[i];
  }
  init.mlp(prefix + ".global", cfg.feature_dim, 2 * cfg.feature_dim, cfg.feature_dim);
}

template <typename T>
ImageTokens<T> encode_image(const ParamSet<T>& ps, const std::string& prefix,
                            const Tensor<T>& image, const ImageEncoderConfig& cfg) {
  const std::size_t n = cfg.image_size;
  if (image.shape() != Shape{3, n, n})
    throw ShapeError("encode_image: expected image [3, " + std::to_string(n) + ", " +
                     std::to_string(n) + "], got " + shape_str(image.shape()));
  Tensor<T> x = image;
  const std::size_t stages = cfg.stages();
  for (std::size_t i = 0; i < stages; ++i) {
    const std::string name = prefix + ".conv" + std::to_string(i);
    x = gelu(conv2d(x, ps.at(name + ".weight"), ps.at(name + ".bias"), 2));
  }
  const auto features = transpose(reshape(x, {cfg.feature_dim, kGridTokens}));
  const auto pos = Tensor<T>::constant(
      {kGridTokens, 3}, [] {
        const auto p = grid_positions();
        return std::vector<T>(p.begin(), p.end());
      }());
  const auto global = mlp(ps, prefix + ".global", mean_rows(features));
  return {concat<T>({features, pos}, 1), global, features};
}

template ImageTokens<float> encode_image(const ParamSet<float>&, const std::string&,
                                         const Tensor<float>&, const ImageEncoderConfig&);
template ImageTokens<double> encode_image(const ParamSet<double>&, const std::string&,
                                          const Tensor<double>&, const ImageEncoderConfig&);

}  // namespace immf::encoders
