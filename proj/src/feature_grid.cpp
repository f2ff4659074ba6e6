#include "bcf/feature_grid.hpp"

#include <cmath>
#include <string>

#include "bcf/error.hpp"
#include "bcf/parallel.hpp"

namespace bcf {

namespace {

bool is_pow2(int x) { return x > 0 && (x & (x - 1)) == 0; }

// Texel (x, y) of a block grid: block index and position inside the block.
inline int block_of(int width, int x, int y) { return (y / kBlockDim) * (width / kBlockDim) + x / kBlockDim; }
inline int local_of(int x, int y) { return (y % kBlockDim) * kBlockDim + x % kBlockDim; }

}  // namespace

BlockGrid::BlockGrid(int w, int h) : width(w), height(h) {
  if (w % kBlockDim || h % kBlockDim || w <= 0 || h <= 0)
    throw ConfigError("block grid size must be a positive multiple of 4, got " + std::to_string(w) + "x" +
                      std::to_string(h));
  endpoints.setZero(3 * kEndpointCount, block_count());
  alpha.setZero(kTexelsPerBlock, block_count());
  partition.assign(std::size_t(block_count()), 0);
}

BlockParams<double> BlockGrid::block(int b) const {
  BlockParams<double> p;
  p.endpoints = Eigen::Map<const Eigen::Matrix<double, 3, kEndpointCount>>(endpoints.col(b).data());
  p.alpha = alpha.col(b);
  p.partition = partition[std::size_t(b)];
  return p;
}

void BlockGrid::set_block(int b, const BlockParams<double>& params) {
  Eigen::Map<Eigen::Matrix<double, 3, kEndpointCount>>(endpoints.col(b).data()) = params.endpoints;
  alpha.col(b) = params.alpha;
  partition[std::size_t(b)] = params.partition;
}

int full_mip_count(int size) {
  if (!is_pow2(size) || size < kBlockDim) throw ConfigError("layer size must be a power of two >= 4");
  int count = 1;
  while ((size >> (count - 1)) > kBlockDim) ++count;
  return count;
}

FeaturePyramid::FeaturePyramid(int layer_id, int size, int mip_count, Storage storage, const Bc6Mode& mode)
    : layer_id_(layer_id), size_(size), storage_(storage), mode_(mode) {
  const int full = full_mip_count(size);
  if (mip_count < 1 || mip_count > full)
    throw ConfigError("layer " + std::to_string(layer_id) + ": " + std::to_string(mip_count) +
                      " mips requested, size " + std::to_string(size) + " allows at most " + std::to_string(full));
  for (int m = 0; m < mip_count; ++m) {
    const int s = size >> m;
    if (storage == Storage::Raw)
      raw_.emplace_back(s, s);
    else
      blocks_.emplace_back(s, s);
  }
}

void FeaturePyramid::randomize(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (RawGrid& g : raw_)
    for (Eigen::Index i = 0; i < g.texels.size(); ++i) g.texels.data()[i] = dist(rng);
}

FeaturePyramid FeaturePyramid::zeros_like() const {
  FeaturePyramid out(layer_id_, size_, mip_count(), storage_, mode_);
  if (storage_ == Storage::Block)
    for (std::size_t m = 0; m < blocks_.size(); ++m) out.blocks_[m].partition = blocks_[m].partition;
  return out;
}

std::vector<std::span<double>> FeaturePyramid::parameters() {
  std::vector<std::span<double>> out;
  for (RawGrid& g : raw_) out.emplace_back(g.texels.data(), std::size_t(g.texels.size()));
  for (BlockGrid& g : blocks_) {
    out.emplace_back(g.endpoints.data(), std::size_t(g.endpoints.size()));
    out.emplace_back(g.alpha.data(), std::size_t(g.alpha.size()));
  }
  return out;
}

std::vector<std::span<const double>> FeaturePyramid::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& s : const_cast<FeaturePyramid*>(this)->parameters()) out.emplace_back(s.data(), s.size());
  return out;
}

std::size_t FeaturePyramid::parameter_count() const {
  std::size_t n = 0;
  for (const auto& s : parameters()) n += s.size();
  return n;
}

FeaturePyramid init_from_raw(const FeaturePyramid& raw, const Bc6Mode& mode) {
  if (raw.storage() != FeaturePyramid::Storage::Raw) throw ConfigError("init_from_raw expects raw storage");
  FeaturePyramid out(raw.layer_id(), raw.size(), raw.mip_count(), FeaturePyramid::Storage::Block, mode);
  for (int m = 0; m < raw.mip_count(); ++m) {
    const RawGrid& src = raw.raw()[std::size_t(m)];
    BlockGrid& dst = out.blocks()[std::size_t(m)];
    if (src.width != dst.width || src.height != dst.height)
      throw ConfigError("raw mip " + std::to_string(m) + " does not match the pyramid shape");
    parallel_for(std::size_t(dst.block_count()), [&](std::size_t b) {
      const int bx = int(b) % dst.blocks_x(), by = int(b) / dst.blocks_x();
      TexelBlock<double> texels;
      for (int i = 0; i < kTexelsPerBlock; ++i) {
        const int x = bx * kBlockDim + i % kBlockDim, y = by * kBlockDim + i / kBlockDim;
        texels.col(i) = src.texels.col(Eigen::Index(y) * src.width + x);
      }
      dst.set_block(int(b), encode_block(texels, mode));
    });
  }
  return out;
}

void project_params(FeaturePyramid& pyramid) {
  const double hi = pyramid.mode().max_endpoint();
  for (BlockGrid& g : pyramid.blocks()) {
    g.endpoints = g.endpoints.cwiseMax(0.0).cwiseMin(hi);
    g.alpha = g.alpha.cwiseMax(0.0).cwiseMin(1.0);
  }
}

FeaturePyramid quantize_pyramid(const FeaturePyramid& pyramid) {
  FeaturePyramid out = pyramid;
  for (BlockGrid& g : out.blocks())
    for (int b = 0; b < g.block_count(); ++b) g.set_block(b, quantize_block(g.block(b), pyramid.mode()));
  return out;
}

DecodedPyramid decode_pyramid(const FeaturePyramid& pyramid) {
  DecodedPyramid out;
  decode_pyramid(pyramid, out);
  return out;
}

void decode_pyramid(const FeaturePyramid& pyramid, DecodedPyramid& out) {
  const int mips = pyramid.mip_count();
  out.sizes.resize(std::size_t(mips));
  out.mips.resize(std::size_t(mips));
  for (int m = 0; m < mips; ++m) {
    const int s = pyramid.mip_size(m);
    out.sizes[std::size_t(m)] = s;
    TexelGrid<double>& dst = out.mips[std::size_t(m)];
    if (pyramid.storage() == FeaturePyramid::Storage::Raw) {
      dst = pyramid.raw()[std::size_t(m)].texels;
      continue;
    }
    dst.resize(3, Eigen::Index(s) * s);
    const BlockGrid& g = pyramid.blocks()[std::size_t(m)];
    parallel_for(std::size_t(g.block_count()), [&](std::size_t b) {
      const TexelBlock<double> texels = decode_block_soft(g.block(int(b)), pyramid.mode());
      const int bx = int(b) % g.blocks_x(), by = int(b) / g.blocks_x();
      for (int i = 0; i < kTexelsPerBlock; ++i) {
        const int x = bx * kBlockDim + i % kBlockDim, y = by * kBlockDim + i / kBlockDim;
        dst.col(Eigen::Index(y) * s + x) = texels.col(i);
      }
    });
  }
}

void decode_pyramid_backward(const FeaturePyramid& pyramid, const DecodedPyramid& texel_grad, FeaturePyramid& grad) {
  for (int m = 0; m < pyramid.mip_count(); ++m) {
    const TexelGrid<double>& tg = texel_grad.mips[std::size_t(m)];
    if (pyramid.storage() == FeaturePyramid::Storage::Raw) {
      grad.raw()[std::size_t(m)].texels += tg;
      continue;
    }
    const int s = pyramid.mip_size(m);
    const BlockGrid& g = pyramid.blocks()[std::size_t(m)];
    BlockGrid& gg = grad.blocks()[std::size_t(m)];
    parallel_for(std::size_t(g.block_count()), [&](std::size_t b) {
      const int bx = int(b) % g.blocks_x(), by = int(b) / g.blocks_x();
      TexelBlock<double> upstream;
      for (int i = 0; i < kTexelsPerBlock; ++i) {
        const int x = bx * kBlockDim + i % kBlockDim, y = by * kBlockDim + i / kBlockDim;
        upstream.col(i) = tg.col(Eigen::Index(y) * s + x);
      }
      if (upstream.isZero(0.0)) return;
      const BlockParams<double> d = decode_block_soft_backward(g.block(int(b)), upstream, pyramid.mode());
      gg.endpoints.col(Eigen::Index(b)) += Eigen::Map<const Eigen::Matrix<double, 12, 1>>(d.endpoints.data());
      gg.alpha.col(Eigen::Index(b)) += d.alpha;
    });
  }
}

DecodedPyramid zero_texel_grad(const DecodedPyramid& like) {
  DecodedPyramid out;
  out.sizes = like.sizes;
  for (const auto& m : like.mips) out.mips.push_back(TexelGrid<double>::Zero(3, m.cols()));
  return out;
}

BilinearTaps bilinear_taps(int width, int height, double u, double v) {
  const double x = u * width - 0.5, y = v * height - 0.5;
  const double x0f = std::floor(x), y0f = std::floor(y);
  const double fx = x - x0f, fy = y - y0f;
  const auto clampi = [](double c, int n) { return int(std::clamp(c, 0.0, double(n - 1))); };
  const int x0 = clampi(x0f, width), x1 = clampi(x0f + 1, width);
  const int y0 = clampi(y0f, height), y1 = clampi(y0f + 1, height);
  BilinearTaps t;
  t.index = {y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1};
  t.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  return t;
}

TrilinearTaps trilinear_taps(std::span<const int> sizes, double u, double v, double s) {
  const int top = int(sizes.size()) - 1;
  const double sc = std::clamp(s, 0.0, double(top));
  const int m0 = std::min(int(std::floor(sc)), top);
  const int m1 = std::min(m0 + 1, top);
  const double lambda = m0 == top ? 0.0 : sc - m0;
  TrilinearTaps t;
  t.mip = {m0, m1};
  t.taps[0] = bilinear_taps(sizes[std::size_t(m0)], sizes[std::size_t(m0)], u, v);
  t.taps[1] = bilinear_taps(sizes[std::size_t(m1)], sizes[std::size_t(m1)], u, v);
  for (int i = 0; i < 4; ++i) {
    t.taps[0].weight[std::size_t(i)] *= 1.0 - lambda;
    t.taps[1].weight[std::size_t(i)] *= lambda;
  }
  return t;
}

Eigen::Vector3d sample_bilinear(const RawGrid& grid, double u, double v) {
  return apply_taps(grid.texels, bilinear_taps(grid.width, grid.height, u, v));
}

Eigen::Vector3d sample_bilinear(const BlockGrid& grid, double u, double v, const Bc6Mode& mode) {
  const BilinearTaps taps = bilinear_taps(grid.width, grid.height, u, v);
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  int cached = -1;
  TexelBlock<double> decoded;
  for (int t = 0; t < 4; ++t) {
    const int x = taps.index[std::size_t(t)] % grid.width, y = taps.index[std::size_t(t)] / grid.width;
    const int b = block_of(grid.width, x, y);
    if (b != cached) {
      decoded = decode_block_soft(grid.block(b), mode);
      cached = b;
    }
    out += taps.weight[std::size_t(t)] * decoded.col(local_of(x, y));
  }
  return out;
}

Eigen::Vector3d sample_trilinear(const FeaturePyramid& pyramid, double u, double v, double s) {
  std::vector<int> sizes;
  for (int m = 0; m < pyramid.mip_count(); ++m) sizes.push_back(pyramid.mip_size(m));
  const double sc = std::clamp(s, 0.0, double(sizes.size() - 1));
  const int m0 = int(std::floor(sc));
  const int top = pyramid.mip_count() - 1;
  const auto at = [&](int m) -> Eigen::Vector3d {
    if (pyramid.storage() == FeaturePyramid::Storage::Raw) return sample_bilinear(pyramid.raw()[std::size_t(m)], u, v);
    return sample_bilinear(pyramid.blocks()[std::size_t(m)], u, v, pyramid.mode());
  };
  if (m0 >= top) return at(top);
  const double lambda = sc - m0;
  return (1.0 - lambda) * at(m0) + lambda * at(m0 + 1);
}

Eigen::Vector3d sample_trilinear(const DecodedPyramid& pyramid, double u, double v, double s) {
  return apply_taps(pyramid, trilinear_taps(pyramid.sizes, u, v, s));
}

}  // namespace bcf
