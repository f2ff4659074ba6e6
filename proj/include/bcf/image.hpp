#pragma once

#include <Eigen/Core>

namespace bcf {

/// Planar multi-channel image: row c holds channel c, column y * width + x.
template <typename Scalar>
struct Image {
  int width = 0;
  int height = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pixels;

  Image() = default;
  Image(int channels, int w, int h)
      : width(w), height(h),
        pixels(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(channels, Eigen::Index(w) * h)) {}

  int channels() const { return int(pixels.rows()); }
  Eigen::Index index(int x, int y) const { return Eigen::Index(y) * width + x; }
  auto at(int x, int y) { return pixels.col(index(x, y)); }
  auto at(int x, int y) const { return pixels.col(index(x, y)); }

  template <typename Other>
  Image<Other> cast() const {
    Image<Other> out;
    out.width = width;
    out.height = height;
    out.pixels = pixels.template cast<Other>();
    return out;
  }
};

using ImageF = Image<float>;
using ImageD = Image<double>;

}  // namespace bcf
