#include "bcf/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "bcf/error.hpp"
#include "bcf/half.hpp"
#include "bcf/parallel.hpp"
#include "bcf/trainer.hpp"

namespace bcf {

ScaleContext ScaleContext::for_mip(int base_size, double mip_level) {
  const double d = std::exp2(mip_level) / double(base_size);
  return {Eigen::Vector2d(d, 0.0), Eigen::Vector2d(0.0, d)};
}

double compute_scale(const ScaleContext& ctx, int layer_width, int layer_height, int layer_mips) {
  const double footprint = std::max({std::abs(ctx.duv_dx.x()) * layer_width, std::abs(ctx.duv_dx.y()) * layer_height,
                                     std::abs(ctx.duv_dy.x()) * layer_width, std::abs(ctx.duv_dy.y()) * layer_height});
  if (!(footprint > 0.0)) return 0.0;
  return std::clamp(std::log2(footprint), 0.0, double(layer_mips - 1));
}

DecodedPyramid decode_texture_hw(const DdsTexture& texture) {
  DecodedPyramid out;
  for (int m = 0; m < texture.mip_count(); ++m) {
    const int w = std::max(texture.width >> m, 4), h = std::max(texture.height >> m, 4);
    const int bx = w / kBlockDim;
    TexelGrid<double> grid(3, Eigen::Index(w) * h);
    const auto& words = texture.mips[std::size_t(m)];
    parallel_for(words.size(), [&](std::size_t b) {
      const HalfBlock texels = decode_block_hw(words[b]);
      const int x0 = int(b) % bx * kBlockDim, y0 = int(b) / bx * kBlockDim;
      for (int i = 0; i < kTexelsPerBlock; ++i) {
        const Eigen::Index t = Eigen::Index(y0 + i / kBlockDim) * w + x0 + i % kBlockDim;
        for (int c = 0; c < 3; ++c) grid(c, t) = double(half_bits_to_float(texels[std::size_t(i)][std::size_t(c)]));
      }
    });
    out.sizes.push_back(w);
    out.mips.push_back(std::move(grid));
  }
  return out;
}

RuntimeMaterial::RuntimeMaterial(NeuralMaterialPackage package) : package_(std::move(package)) {
  for (const DdsTexture& t : package_.textures) layers_.push_back(decode_texture_hw(t));
}

Eigen::VectorXd RuntimeMaterial::decode_pixel(double u, double v, const ScaleContext& ctx) const {
  Eigen::VectorXd x(3 * Eigen::Index(layers_.size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DecodedPyramid& p = layers_[l];
    const double s = compute_scale(ctx, p.sizes[0], p.sizes[0], p.mip_count());
    x.segment<3>(3 * Eigen::Index(l)) = apply_taps(p, trilinear_taps(p.sizes, u, v, s));
  }
  return forward(package_.mlp, x);
}

Eigen::MatrixXd RuntimeMaterial::decode_batch(const Batch& batch) const {
  const ScaleContext ctx = ScaleContext::for_mip(base_size(), batch.s);
  Eigen::MatrixXd out(channels(), batch.uv.cols());
  parallel_for(std::size_t(batch.uv.cols()), [&](std::size_t p) {
    const Eigen::Index i = Eigen::Index(p);
    out.col(i) = decode_pixel(batch.uv(0, i), batch.uv(1, i), ctx);
  });
  return out;
}

Batch pixel_batch(int size, double s, bool jitter, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Batch b = sample_batch(rng, size, 1, jitter ? 1.0 : 0.0);
  b.s = s;
  return b;
}

ImageD render_decoded(const RuntimeMaterial& material, int out_size, int mip_level, const RenderOptions& options) {
  const int levels = full_mip_count(material.base_size());
  if (mip_level < 0 || mip_level >= levels)
    throw DomainError("mip level " + std::to_string(mip_level) + " outside [0, " + std::to_string(levels - 1) + "]");
  if (out_size < 1) throw DomainError("output size must be positive");
  ImageD img(material.channels(), out_size, out_size);
  img.pixels = material.decode_batch(pixel_batch(out_size, mip_level, options.jitter, options.seed));
  return img;
}

DecodeTiming time_decode(const RuntimeMaterial& material, long pixels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double top = full_mip_count(material.base_size()) - 1;
  Eigen::Matrix3Xd points(3, pixels);
  for (long i = 0; i < pixels; ++i) points.col(i) = Eigen::Vector3d(unit(rng), unit(rng), top * unit(rng));
  double sink = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (long i = 0; i < pixels; ++i)
    sink += material.decode_pixel(points(0, i), points(1, i), ScaleContext::for_mip(material.base_size(), points(2, i)))(0);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  volatile double keep = sink;
  (void)keep;
  return {pixels, elapsed.count()};
}

}  // namespace bcf
