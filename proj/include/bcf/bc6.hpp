#pragma once

// BC6H two-region block mathematics.
//
// Two decode paths live here. The soft path (`decode_block_soft`) is a
// continuous, almost-everywhere differentiable model of the hardware decoder
// used for training: endpoints are real numbers in the quantization domain
// [0, 2^b - 1] and alphas are real numbers in [0, 1]. The hardware path
// (`decode_block_hw`) is the bit-exact integer decode of a packed 128-bit
// block word in the unsigned 6.6.6.6 two-region mode.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Core>

#include "bcf/error.hpp"

namespace bcf {

inline constexpr int kBlockDim = 4;
inline constexpr int kTexelsPerBlock = 16;
inline constexpr int kPartitionCount = 32;
inline constexpr int kEndpointCount = 4;

enum class Signedness { Unsigned, Signed };

/// Encoding profile: signedness, endpoint bit width b and index bit width q.
struct Bc6Mode {
  Signedness signedness = Signedness::Unsigned;
  int endpoint_bits = 6;
  int index_bits = 3;

  /// Unsigned, b = 6, q = 3: the hardware two-region mode.
  static constexpr Bc6Mode hardware() { return {}; }
  /// Unsigned, b = 6, q = 4. Trainable, but has no hardware encoding.
  static constexpr Bc6Mode research_q4() { return {Signedness::Unsigned, 6, 4}; }

  /// The scale constant a: 31/64 unsigned, 31/32 signed.
  constexpr double scale() const {
    return signedness == Signedness::Unsigned ? 31.0 / 64.0 : 31.0 / 32.0;
  }
  constexpr int max_endpoint() const { return (1 << endpoint_bits) - 1; }
  constexpr int index_count() const { return 1 << index_bits; }
  /// Largest magnitude of the interpolated value before bit reinterpretation.
  constexpr double max_value() const { return 31743.0; }
  constexpr double min_value() const {
    return signedness == Signedness::Unsigned ? 0.0 : -31743.0;
  }
  constexpr bool exportable() const {
    return signedness == Signedness::Unsigned && endpoint_bits == 6 && index_bits == 3;
  }
  friend constexpr bool operator==(const Bc6Mode&, const Bc6Mode&) = default;
};

/// Trainable state of one 4x4 block. Endpoint columns are e1, e2 (first
/// subset) and e3, e4 (second subset), in the quantization domain.
template <typename Scalar>
struct BlockParams {
  Eigen::Matrix<Scalar, 3, kEndpointCount> endpoints = Eigen::Matrix<Scalar, 3, kEndpointCount>::Zero();
  Eigen::Matrix<Scalar, kTexelsPerBlock, 1> alpha = Eigen::Matrix<Scalar, kTexelsPerBlock, 1>::Zero();
  int partition = 0;

  friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

template <typename Scalar>
using TexelBlock = Eigen::Matrix<Scalar, 3, kTexelsPerBlock>;

using PartitionMask = std::array<bool, kTexelsPerBlock>;

/// Two-subset partition mask; true marks texels of the second subset.
const PartitionMask& partition_mask(int k);
/// Texel index of the second subset's anchor (its index is stored with q-1 bits).
int partition_anchor(int k);

/// Interpolation weights (out of 64) for q index bits. q must be 3 or 4.
std::span<const int> interpolation_weights(int index_bits);

// ---------------------------------------------------------------------------
// Soft decode path

/// Maps an endpoint from the quantization domain to the 16-bit working range:
/// a * (2^16 e + 2^15) / 2^b.
template <typename Scalar>
Scalar unquantize_endpoint(Scalar e, const Bc6Mode& mode) {
  const double step = mode.scale() * 65536.0 / double(1 << mode.endpoint_bits);
  const double offset = mode.scale() * 32768.0 / double(1 << mode.endpoint_bits);
  return Scalar(step) * e + Scalar(offset);
}

/// d(unquantize_endpoint)/de.
inline double unquantize_slope(const Bc6Mode& mode) {
  return mode.scale() * 65536.0 / double(1 << mode.endpoint_bits);
}

namespace detail {
template <typename Scalar>
Scalar half_piece(Scalar v) {
  using std::floor;
  using std::max;
  return max(Scalar(floor((v - Scalar(1)) / Scalar(1024))) - Scalar(1), Scalar(0));
}
}  // namespace detail

/// Continuous simulation of reinterpreting a 16-bit pattern as a half:
/// w = 2^(h(v)-14) (v/1024 - h(v)), h(v) = max(floor((v-1)/1024) - 1, 0).
/// Exact for every integer v in [0, 31743].
template <typename Scalar>
Scalar bits_to_half_sim(Scalar v) {
  using std::ldexp;
  const Scalar h = detail::half_piece(v);
  return Scalar(ldexp(1.0, int(h) - 14)) * (v / Scalar(1024) - h);
}

/// dw/dv of bits_to_half_sim; the left piece is used on piece boundaries.
template <typename Scalar>
Scalar bits_to_half_sim_slope(Scalar v) {
  using std::ldexp;
  return Scalar(ldexp(1.0, int(detail::half_piece(v)) - 24));
}

/// Inverse of bits_to_half_sim on [0, 65504]; values outside are clamped.
double half_to_bits_sim(double w);

/// Linear interpolation inside the subset selected by `in_second_subset`,
/// clamped to the profile's value range.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> interpolate_texel(const Eigen::Matrix<Scalar, 3, 1>& e1,
                                              const Eigen::Matrix<Scalar, 3, 1>& e2,
                                              const Eigen::Matrix<Scalar, 3, 1>& e3,
                                              const Eigen::Matrix<Scalar, 3, 1>& e4, Scalar alpha,
                                              bool in_second_subset,
                                              const Bc6Mode& mode = Bc6Mode::hardware()) {
  const auto& lo = in_second_subset ? e3 : e1;
  const auto& hi = in_second_subset ? e4 : e2;
  Eigen::Matrix<Scalar, 3, 1> y = lo + alpha * (hi - lo);
  return y.cwiseMax(Scalar(mode.min_value())).cwiseMin(Scalar(mode.max_value()));
}

/// Soft decode of one block: unquantize, interpolate, reinterpret.
/// Texel i is column i (row-major within the block).
template <typename Scalar>
TexelBlock<Scalar> decode_block_soft(const BlockParams<Scalar>& params,
                                     const Bc6Mode& mode = Bc6Mode::hardware()) {
  Eigen::Matrix<Scalar, 3, kEndpointCount> unq;
  for (int j = 0; j < kEndpointCount; ++j)
    for (int c = 0; c < 3; ++c) unq(c, j) = unquantize_endpoint(params.endpoints(c, j), mode);

  const PartitionMask& mask = partition_mask(params.partition);
  TexelBlock<Scalar> out;
  for (int i = 0; i < kTexelsPerBlock; ++i) {
    const int lo = mask[i] ? 2 : 0;
    for (int c = 0; c < 3; ++c) {
      Scalar y = unq(c, lo) + params.alpha(i) * (unq(c, lo + 1) - unq(c, lo));
      y = std::min(std::max(y, Scalar(mode.min_value())), Scalar(mode.max_value()));
      out(c, i) = bits_to_half_sim(y);
    }
  }
  return out;
}

/// Reverse-mode gradient of decode_block_soft. `upstream` holds dL/dtexel;
/// the result carries dL/dendpoint and dL/dalpha (partition is copied).
template <typename Scalar>
BlockParams<Scalar> decode_block_soft_backward(const BlockParams<Scalar>& params,
                                               const TexelBlock<Scalar>& upstream,
                                               const Bc6Mode& mode = Bc6Mode::hardware()) {
  Eigen::Matrix<Scalar, 3, kEndpointCount> unq;
  for (int j = 0; j < kEndpointCount; ++j)
    for (int c = 0; c < 3; ++c) unq(c, j) = unquantize_endpoint(params.endpoints(c, j), mode);

  BlockParams<Scalar> grad;
  grad.partition = params.partition;
  Eigen::Matrix<Scalar, 3, kEndpointCount> unq_grad = Eigen::Matrix<Scalar, 3, kEndpointCount>::Zero();
  const PartitionMask& mask = partition_mask(params.partition);
  for (int i = 0; i < kTexelsPerBlock; ++i) {
    const int lo = mask[i] ? 2 : 0;
    const Scalar a = params.alpha(i);
    for (int c = 0; c < 3; ++c) {
      const Scalar delta = unq(c, lo + 1) - unq(c, lo);
      const Scalar y = unq(c, lo) + a * delta;
      if (y < Scalar(mode.min_value()) || y > Scalar(mode.max_value())) continue;
      const Scalar g = upstream(c, i) * bits_to_half_sim_slope(y);
      unq_grad(c, lo) += g * (Scalar(1) - a);
      unq_grad(c, lo + 1) += g * a;
      grad.alpha(i) += g * delta;
    }
  }
  grad.endpoints = unq_grad * Scalar(unquantize_slope(mode));
  return grad;
}

/// Projects onto the feasible set: alphas in [0,1], endpoints in [0, 2^b-1].
void project_block(BlockParams<double>& params, const Bc6Mode& mode);

/// Rounds endpoints to integers and snaps each alpha to the nearest
/// interpolation weight w/64 (ties toward the larger weight).
BlockParams<double> quantize_block(const BlockParams<double>& params,
                                   const Bc6Mode& mode = Bc6Mode::hardware());

// ---------------------------------------------------------------------------
// Integer codes, packing and hardware decode

/// Integer form of a quantized block: endpoint codes and per-texel indices.
struct BlockCodes {
  std::array<std::array<std::uint8_t, 3>, kEndpointCount> endpoints{};
  std::array<std::uint8_t, kTexelsPerBlock> indices{};
  std::uint8_t partition = 0;

  friend bool operator==(const BlockCodes&, const BlockCodes&) = default;
};

/// 128-bit block word, little-endian byte order.
using Bc6Word = std::array<std::uint8_t, 16>;

/// Converts quantized params (integer endpoints, table alphas) to codes.
BlockCodes to_codes(const BlockParams<double>& quantized, const Bc6Mode& mode = Bc6Mode::hardware());
BlockParams<double> from_codes(const BlockCodes& codes, const Bc6Mode& mode = Bc6Mode::hardware());

/// True when both anchor indices fit in q-1 bits.
bool is_canonical(const BlockCodes& codes, const Bc6Mode& mode = Bc6Mode::hardware());
/// Swaps a subset's endpoints and mirrors its indices wherever the anchor
/// index has its high bit set. Decoded texels are unchanged.
BlockCodes canonicalize(const BlockCodes& codes, const Bc6Mode& mode = Bc6Mode::hardware());

/// Packs into the unsigned 6.6.6.6 two-region layout (mode 0x1E).
/// Non-canonical codes are canonicalized first.
Bc6Word pack_block(const BlockCodes& codes);
/// Throws FormatError for any other mode.
BlockCodes unpack_block(const Bc6Word& word);

/// Half-float bit patterns, [texel][channel].
using HalfBlock = std::array<std::array<std::uint16_t, 3>, kTexelsPerBlock>;

/// Bit-exact hardware decode of the supported mode.
HalfBlock decode_block_hw(const Bc6Word& word);
HalfBlock decode_block_hw(const BlockCodes& codes);

// ---------------------------------------------------------------------------
// Encoder

/// Least-squares two-segment fit over all 32 partitions; returns continuous
/// (unquantized) params minimizing the soft-decode squared error.
BlockParams<double> encode_block(const TexelBlock<double>& texels,
                                 const Bc6Mode& mode = Bc6Mode::hardware());

/// Sum of squared differences between decode_block_soft(params) and texels.
double block_error(const BlockParams<double>& params, const TexelBlock<double>& texels,
                   const Bc6Mode& mode = Bc6Mode::hardware());

}  // namespace bcf
