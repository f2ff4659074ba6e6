#pragma once

// Reference materials: an 8-channel texture stack with a box-filtered mip
// chain, and the filtered reference lookup used as the training target.

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bcf/image.hpp"

namespace bcf {

inline constexpr int kMaterialChannels = 8;

/// Channel order of a material stack.
const std::array<std::string, kMaterialChannels>& channel_semantics();

struct MaterialStack {
  std::vector<ImageF> mips;  // mips[0] is the base level

  int channels() const { return mips.empty() ? 0 : mips[0].channels(); }
  int base_size() const { return mips.empty() ? 0 : mips[0].width; }
  int mip_count() const { return int(mips.size()); }
};

/// Successive 2x2 box averages from `base` down to 4x4. The base must be
/// square with a power-of-two side >= 4 (ConfigError otherwise).
MaterialStack build_mip_pyramid(const ImageF& base);

/// Catmull-Rom weights for the four taps around a sample at fraction t.
inline std::array<double, 4> catmull_rom_weights(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t), 0.5 * (t3 - t2)};
}

/// Bicubic (Catmull-Rom) lookup of one mip, half-texel centres, clamp to edge.
Eigen::VectorXd sample_bicubic(const ImageF& image, double u, double v);

/// Filtered reference F(M)(u, v, s): bicubic at mips floor(s) and floor(s)+1
/// blended by the fractional part; s is clamped to [0, S-1].
Eigen::VectorXd reference_sample(const MaterialStack& stack, double u, double v, double s);

}  // namespace bcf
