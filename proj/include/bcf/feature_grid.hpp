#pragma once

// Feature layers: mipmapped grids of 3-channel latent features, stored either
// as unconstrained texels (first training phase) or as BC6 block parameters.
// Every mip has its own parameters.

#include <array>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bcf/bc6.hpp"

namespace bcf {

/// Decoded 3-channel texels, column y * width + x.
template <typename Scalar>
using TexelGrid = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

struct RawGrid {
  int width = 0;
  int height = 0;
  TexelGrid<double> texels;

  RawGrid() = default;
  RawGrid(int w, int h) : width(w), height(h), texels(TexelGrid<double>::Zero(3, Eigen::Index(w) * h)) {}
};

/// Structure-of-arrays block storage. Column b of `endpoints` is the
/// column-major 3x4 endpoint matrix of block b; blocks are row-major.
struct BlockGrid {
  int width = 0;
  int height = 0;
  Eigen::Matrix<double, 3 * kEndpointCount, Eigen::Dynamic> endpoints;
  Eigen::Matrix<double, kTexelsPerBlock, Eigen::Dynamic> alpha;
  std::vector<int> partition;

  BlockGrid() = default;
  BlockGrid(int w, int h);

  int blocks_x() const { return width / kBlockDim; }
  int blocks_y() const { return height / kBlockDim; }
  int block_count() const { return blocks_x() * blocks_y(); }

  BlockParams<double> block(int b) const;
  void set_block(int b, const BlockParams<double>& params);

  bool operator==(const BlockGrid& o) const {
    return width == o.width && height == o.height && endpoints == o.endpoints && alpha == o.alpha &&
           partition == o.partition;
  }
};

/// Number of mips from `size` down to a single 4x4 block.
int full_mip_count(int size);

/// One feature layer. Square, power-of-two, multiple of 4.
class FeaturePyramid {
 public:
  enum class Storage { Raw, Block };

  FeaturePyramid() = default;
  /// Zero-initialized pyramid. Throws ConfigError on invalid sizes.
  FeaturePyramid(int layer_id, int size, int mip_count, Storage storage,
                 const Bc6Mode& mode = Bc6Mode::hardware());

  int layer_id() const { return layer_id_; }
  int size() const { return size_; }
  int mip_count() const { return int(storage_ == Storage::Raw ? raw_.size() : blocks_.size()); }
  int mip_size(int m) const { return size_ >> m; }
  Storage storage() const { return storage_; }
  const Bc6Mode& mode() const { return mode_; }

  std::vector<RawGrid>& raw() { return raw_; }
  const std::vector<RawGrid>& raw() const { return raw_; }
  std::vector<BlockGrid>& blocks() { return blocks_; }
  const std::vector<BlockGrid>& blocks() const { return blocks_; }

  /// Fills raw texels uniformly from [lo, hi].
  void randomize(std::mt19937_64& rng, double lo, double hi);
  /// Same shapes and storage, all parameters zero.
  FeaturePyramid zeros_like() const;

  /// Contiguous parameter arrays, in a fixed order (for the optimizer).
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::size_t parameter_count() const;

 private:
  int layer_id_ = 0;
  int size_ = 0;
  Storage storage_ = Storage::Raw;
  Bc6Mode mode_;
  std::vector<RawGrid> raw_;
  std::vector<BlockGrid> blocks_;
};

/// Each 4x4 tile of each raw mip goes through encode_block; the chosen
/// partitions stay fixed afterwards.
FeaturePyramid init_from_raw(const FeaturePyramid& raw, const Bc6Mode& mode = Bc6Mode::hardware());

/// Clamps alphas to [0,1] and endpoints to [0, 2^b - 1]. No-op on raw storage.
void project_params(FeaturePyramid& pyramid);

/// Rounds every block through quantize_block.
FeaturePyramid quantize_pyramid(const FeaturePyramid& pyramid);

// ---------------------------------------------------------------------------
// Decoded view and sampling

/// Dense texels of every mip of one layer.
struct DecodedPyramid {
  std::vector<int> sizes;
  std::vector<TexelGrid<double>> mips;

  int mip_count() const { return int(mips.size()); }
};

/// Soft decode of every block (or a copy of raw texels).
DecodedPyramid decode_pyramid(const FeaturePyramid& pyramid);
void decode_pyramid(const FeaturePyramid& pyramid, DecodedPyramid& out);

/// Accumulates dL/dparams into `grad` given dL/dtexels of the decoded view.
/// `grad` must have the shapes of `pyramid` (see zeros_like).
void decode_pyramid_backward(const FeaturePyramid& pyramid, const DecodedPyramid& texel_grad,
                             FeaturePyramid& grad);

/// Bilinear footprint: four texel indices and weights. Half-texel centers,
/// clamp-to-edge addressing.
struct BilinearTaps {
  std::array<int, 4> index{};
  std::array<double, 4> weight{};
};
BilinearTaps bilinear_taps(int width, int height, double u, double v);

/// Two bilinear footprints on mips `mip[0]` and `mip[1]`; the weights of the
/// second are already multiplied by lambda and those of the first by 1-lambda.
struct TrilinearTaps {
  std::array<int, 2> mip{};
  std::array<BilinearTaps, 2> taps{};
};
TrilinearTaps trilinear_taps(std::span<const int> sizes, double u, double v, double s);

template <typename Derived>
Eigen::Vector3d apply_taps(const Eigen::MatrixBase<Derived>& texels, const BilinearTaps& taps) {
  Eigen::Vector3d out = taps.weight[0] * texels.col(taps.index[0]);
  for (int t = 1; t < 4; ++t) out += taps.weight[t] * texels.col(taps.index[t]);
  return out;
}

inline Eigen::Vector3d apply_taps(const DecodedPyramid& pyr, const TrilinearTaps& taps) {
  return apply_taps(pyr.mips[taps.mip[0]], taps.taps[0]) + apply_taps(pyr.mips[taps.mip[1]], taps.taps[1]);
}

/// Adjoint of apply_taps: adds weight * upstream to each tapped texel.
inline void scatter_taps(const TrilinearTaps& taps, const Eigen::Vector3d& upstream, DecodedPyramid& grad) {
  for (int k = 0; k < 2; ++k) {
    TexelGrid<double>& g = grad.mips[std::size_t(taps.mip[std::size_t(k)])];
    const BilinearTaps& t = taps.taps[std::size_t(k)];
    for (int i = 0; i < 4; ++i) g.col(t.index[std::size_t(i)]) += t.weight[std::size_t(i)] * upstream;
  }
}

/// Zero texel gradients shaped like `like`.
DecodedPyramid zero_texel_grad(const DecodedPyramid& like);

Eigen::Vector3d sample_bilinear(const RawGrid& grid, double u, double v);
/// Decodes only the four blocks touched by the footprint.
Eigen::Vector3d sample_bilinear(const BlockGrid& grid, double u, double v,
                                const Bc6Mode& mode = Bc6Mode::hardware());
/// s is clamped to [0, S-1].
Eigen::Vector3d sample_trilinear(const FeaturePyramid& pyramid, double u, double v, double s);
Eigen::Vector3d sample_trilinear(const DecodedPyramid& pyramid, double u, double v, double s);

}  // namespace bcf
