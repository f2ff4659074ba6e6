#include "bcf/material.hpp"

#include <algorithm>
#include <cmath>

#include "bcf/error.hpp"

namespace bcf {

const std::array<std::string, kMaterialChannels>& channel_semantics() {
  static const std::array<std::string, kMaterialChannels> names = {
      "albedo_r", "albedo_g", "albedo_b", "normal_x", "normal_y", "ao", "roughness", "metalness"};
  return names;
}

MaterialStack build_mip_pyramid(const ImageF& base) {
  const int w = base.width;
  if (w != base.height || w < 4 || (w & (w - 1)) != 0)
    throw ConfigError("material base must be square with a power-of-two side >= 4, got " + std::to_string(base.width) +
                      "x" + std::to_string(base.height));
  MaterialStack stack;
  stack.mips.push_back(base);
  while (stack.mips.back().width > 4) {
    const ImageF& src = stack.mips.back();
    ImageF dst(src.channels(), src.width / 2, src.height / 2);
    for (int y = 0; y < dst.height; ++y)
      for (int x = 0; x < dst.width; ++x)
        dst.at(x, y) = 0.25f * (src.at(2 * x, 2 * y) + src.at(2 * x + 1, 2 * y) + src.at(2 * x, 2 * y + 1) +
                                src.at(2 * x + 1, 2 * y + 1));
    stack.mips.push_back(std::move(dst));
  }
  return stack;
}

Eigen::VectorXd sample_bicubic(const ImageF& image, double u, double v) {
  const double x = u * image.width - 0.5, y = v * image.height - 0.5;
  const double xf = std::floor(x), yf = std::floor(y);
  const std::array<double, 4> wx = catmull_rom_weights(x - xf), wy = catmull_rom_weights(y - yf);
  std::array<int, 4> xs, ys;
  for (int k = 0; k < 4; ++k) {
    xs[std::size_t(k)] = int(std::clamp(xf - 1 + k, 0.0, double(image.width - 1)));
    ys[std::size_t(k)] = int(std::clamp(yf - 1 + k, 0.0, double(image.height - 1)));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(image.channels());
  for (int j = 0; j < 4; ++j) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(image.channels());
    for (int i = 0; i < 4; ++i)
      row += wx[std::size_t(i)] * image.at(xs[std::size_t(i)], ys[std::size_t(j)]).cast<double>();
    out += wy[std::size_t(j)] * row;
  }
  return out;
}

Eigen::VectorXd reference_sample(const MaterialStack& stack, double u, double v, double s) {
  const int top = stack.mip_count() - 1;
  const double sc = std::clamp(s, 0.0, double(top));
  const int m0 = std::min(int(std::floor(sc)), top);
  const double lambda = sc - m0;
  Eigen::VectorXd out = sample_bicubic(stack.mips[std::size_t(m0)], u, v);
  if (m0 < top && lambda > 0.0)
    out = (1.0 - lambda) * out + lambda * sample_bicubic(stack.mips[std::size_t(m0 + 1)], u, v);
  return out;
}

}  // namespace bcf
