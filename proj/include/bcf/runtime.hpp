#pragma once

// Inference side: decode an imported package the way a GPU would, with
// hardware-exact BC6H texels, trilinear sampling and one network evaluation
// per pixel.

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "bcf/feature_grid.hpp"
#include "bcf/image.hpp"
#include "bcf/package.hpp"

namespace bcf {

struct Batch;

/// Screen-space uv derivatives: uv change per output pixel along x and y.
struct ScaleContext {
  Eigen::Vector2d duv_dx = Eigen::Vector2d::Zero();
  Eigen::Vector2d duv_dy = Eigen::Vector2d::Zero();

  /// Isotropic footprint of one pixel of mip `mip_level` of a base_size^2 target.
  static ScaleContext for_mip(int base_size, double mip_level);
};

/// log2 of the largest texel footprint per pixel, clamped to [0, mips - 1].
double compute_scale(const ScaleContext& ctx, int layer_width, int layer_height, int layer_mips);

/// Texels of every mip of a BC6H texture, decoded with decode_block_hw.
DecodedPyramid decode_texture_hw(const DdsTexture& texture);

class RuntimeMaterial {
 public:
  explicit RuntimeMaterial(NeuralMaterialPackage package);

  const NeuralMaterialPackage& package() const { return package_; }
  const std::vector<DecodedPyramid>& layers() const { return layers_; }
  int base_size() const { return package_.manifest.base_size; }
  int channels() const { return package_.mlp.output_width(); }

  Eigen::VectorXd decode_pixel(double u, double v, const ScaleContext& ctx) const;
  /// decode_pixel at every point of `batch`, with the footprint of mip batch.s.
  Eigen::MatrixXd decode_batch(const Batch& batch) const;

 private:
  NeuralMaterialPackage package_;
  std::vector<DecodedPyramid> layers_;
};

/// size x size pixel centres (or one uniform sample per pixel cell when
/// jittered, drawn from `seed`), tagged with scale s.
Batch pixel_batch(int size, double s, bool jitter, std::uint64_t seed);

struct RenderOptions {
  bool jitter = false;
  std::uint64_t seed = 0;
};

/// out_size^2 image decoded at the footprint of `mip_level`. Throws
/// DomainError when mip_level is outside the reference pyramid.
ImageD render_decoded(const RuntimeMaterial& material, int out_size, int mip_level, const RenderOptions& options = {});

struct DecodeTiming {
  long pixels = 0;
  double seconds = 0.0;
  double ns_per_pixel() const { return pixels ? 1e9 * seconds / double(pixels) : 0.0; }
};

/// Single-threaded decode_pixel throughput over random pixels and scales.
DecodeTiming time_decode(const RuntimeMaterial& material, long pixels, std::uint64_t seed);

}  // namespace bcf
