#include <cmath>
#include <random>

#include <half.h>

#include "bcf/bc6.hpp"
#include "bcf/half.hpp"
#include "doctest.h"

using namespace bcf;

namespace {

BlockParams<double> random_params(std::mt19937_64& rng, const Bc6Mode& mode = Bc6Mode::hardware()) {
  std::uniform_real_distribution<double> e(0.0, mode.max_endpoint());
  std::uniform_real_distribution<double> a(0.0, 1.0);
  std::uniform_int_distribution<int> k(0, kPartitionCount - 1);
  BlockParams<double> p;
  for (int j = 0; j < 4; ++j)
    for (int c = 0; c < 3; ++c) p.endpoints(c, j) = e(rng);
  for (int i = 0; i < 16; ++i) p.alpha(i) = a(rng);
  p.partition = k(rng);
  return p;
}

BlockCodes random_codes(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> e(0, 63), idx(0, 7), k(0, 31);
  BlockCodes codes;
  for (auto& ep : codes.endpoints)
    for (auto& c : ep) c = std::uint8_t(e(rng));
  for (auto& i : codes.indices) i = std::uint8_t(idx(rng));
  codes.partition = std::uint8_t(k(rng));
  return codes;
}

// Scalar composition of unquantize (496 e + 248 for b = 6 unsigned),
// per-subset linear interpolation, clamp, and the half reinterpretation
// formula, texel by texel.
double oracle_texel(const BlockParams<double>& p, int texel, int channel) {
  const bool in_second = partition_mask(p.partition)[texel];
  const int j = in_second ? 2 : 0;
  const double lo = 496.0 * p.endpoints(channel, j) + 248.0;
  const double hi = 496.0 * p.endpoints(channel, j + 1) + 248.0;
  double v = lo + p.alpha(texel) * (hi - lo);
  if (v < 0.0) v = 0.0;
  if (v > 31743.0) v = 31743.0;
  double h = std::floor((v - 1.0) / 1024.0) - 1.0;
  if (h < 0.0) h = 0.0;
  return std::pow(2.0, h - 14.0) * (v / 1024.0 - h);
}

double half_value(std::uint16_t bits) {
  half h;
  h.setBits(bits);
  return float(h);
}

// Independent single-segment fit: power-iteration principal axis in the
// half-bit domain, endpoints at the extreme projections.
double single_segment_error(const TexelBlock<double>& texels) {
  Eigen::Matrix3Xd bits(3, 16);
  for (int i = 0; i < 16; ++i)
    for (int c = 0; c < 3; ++c) bits(c, i) = half_to_bits_sim(texels(c, i));
  Eigen::Vector3d mean = bits.rowwise().mean();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 16; ++i) cov += (bits.col(i) - mean) * (bits.col(i) - mean).transpose();
  Eigen::Vector3d axis(1.0, 0.7, 0.3);
  for (int it = 0; it < 200; ++it) {
    Eigen::Vector3d next = cov * axis;
    if (next.norm() < 1e-300) break;
    axis = next.normalized();
  }
  if ((cov * axis).norm() < 1e-9) axis.setZero();
  double tmin = 1e300, tmax = -1e300;
  for (int i = 0; i < 16; ++i) {
    const double t = axis.dot(bits.col(i) - mean);
    tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
  }
  BlockParams<double> p;
  for (int c = 0; c < 3; ++c) {
    p.endpoints(c, 0) = std::clamp((mean(c) + tmin * axis(c) - 248.0) / 496.0, 0.0, 63.0);
    p.endpoints(c, 1) = std::clamp((mean(c) + tmax * axis(c) - 248.0) / 496.0, 0.0, 63.0);
  }
  p.endpoints.col(2) = p.endpoints.col(0);
  p.endpoints.col(3) = p.endpoints.col(1);
  const Eigen::Vector3d lo = (496.0 * p.endpoints.col(0)).array() + 248.0;
  const Eigen::Vector3d hi = (496.0 * p.endpoints.col(1)).array() + 248.0;
  const double len2 = (hi - lo).squaredNorm();
  for (int i = 0; i < 16; ++i)
    p.alpha(i) = len2 > 1e-12 ? std::clamp((hi - lo).dot(bits.col(i) - lo) / len2, 0.0, 1.0) : 0.0;
  return block_error(p, texels);
}

}  // namespace

TEST_CASE("partition masks follow the two-subset table") {
  const PartitionMask& k0 = partition_mask(0);
  const PartitionMask& k1 = partition_mask(1);
  for (int row = 0; row < 4; ++row) {
    CHECK(k0[row * 4 + 0] == false);
    CHECK(k0[row * 4 + 1] == false);
    CHECK(k0[row * 4 + 2] == true);
    CHECK(k0[row * 4 + 3] == true);
    CHECK(k1[row * 4 + 0] == false);
    CHECK(k1[row * 4 + 1] == false);
    CHECK(k1[row * 4 + 2] == false);
    CHECK(k1[row * 4 + 3] == true);
  }
  CHECK_THROWS_AS(partition_mask(32), DomainError);
  CHECK_THROWS_AS(partition_mask(-1), DomainError);

  for (int k = 0; k < kPartitionCount; ++k) {
    const PartitionMask& m = partition_mask(k);
    CHECK_FALSE(m[0]);
    const int second = int(std::count(m.begin(), m.end(), true));
    CHECK(second > 0);
    CHECK(second < 16);
    CHECK(m[partition_anchor(k)]);
    CHECK(&m == &partition_mask(k));
  }
}

TEST_CASE("unquantize matches the hardware scale on interior codes") {
  const Bc6Mode mode;
  CHECK(unquantize_endpoint(0.0, mode) == 248.0);
  CHECK(unquantize_endpoint(32.0, mode) == 16120.0);
  CHECK(unquantize_endpoint(63.0, mode) == 31496.0);
  for (int e = 1; e < 63; ++e) {
    const int unq = ((e << 16) + 0x8000) >> 6;
    CHECK(unquantize_endpoint(double(e), mode) == unq * 31.0 / 64.0);
  }
  CHECK(unquantize_slope(mode) == 496.0);
}

TEST_CASE("bit reinterpretation simulation") {
  CHECK(bits_to_half_sim(0.0) == 0.0);
  CHECK(bits_to_half_sim(15360.0) == 1.0);
  CHECK(bits_to_half_sim(31743.0) == 65504.0);
  CHECK(bits_to_half_sim(1024.0) == 6.103515625e-5);

  SUBCASE("exhaustive against Imath half") {
    for (int v = 0; v <= 31743; ++v) {
      const double expected = half_value(std::uint16_t(v));
      REQUIRE(bits_to_half_sim(double(v)) == expected);
    }
  }
  SUBCASE("inverse") {
    for (int v = 0; v <= 31743; v += 7) CHECK(half_to_bits_sim(bits_to_half_sim(double(v))) == doctest::Approx(v));
    CHECK(half_to_bits_sim(-1.0) == 0.0);
    CHECK(half_to_bits_sim(1e9) == 31743.0);
  }
  SUBCASE("slope is the left piece") {
    // On [2048, 3072] the exponent field is 2: slope 2^-23.
    CHECK(bits_to_half_sim_slope(2500.0) == std::ldexp(1.0, -23));
    CHECK(bits_to_half_sim_slope(3072.0) == std::ldexp(1.0, -23));
    CHECK(bits_to_half_sim_slope(3073.0) == std::ldexp(1.0, -22));
    CHECK(bits_to_half_sim_slope(100.0) == std::ldexp(1.0, -24));
  }
}

TEST_CASE("fp16 conversion agrees with Imath") {
  for (int bits = 0; bits < 0x10000; ++bits) {
    const std::uint16_t b = std::uint16_t(bits);
    const half h = [&] { half x; x.setBits(b); return x; }();
    if (h.isNan()) continue;
    REQUIRE(half_bits_to_float(b) == float(h));
    REQUIRE(float_to_half_bits(half_bits_to_float(b)) == b);
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> mag(-20.0f, 17.0f);
  for (int i = 0; i < 200000; ++i) {
    const float f = std::ldexp(1.0f, int(mag(rng))) * std::uniform_real_distribution<float>(-2.0f, 2.0f)(rng);
    REQUIRE(float_to_half_bits(f) == half(f).bits());
  }
  CHECK(float_to_half_bits(1.0f) == 0x3C00);
  CHECK(float_to_half_bits(1e6f) == 0x7C00);
}

TEST_CASE("interpolate_texel") {
  const Eigen::Vector3d e1(512, 512, 512), e2(31760, 512, 512), e3(100, 200, 300), e4(900, 800, 700);
  CHECK(interpolate_texel(e1, e2, e3, e4, 0.0, false) == e1);
  CHECK(interpolate_texel(e1, e2, e3, e4, 1.0, true) == e4);
  CHECK(interpolate_texel(e1, e2, e3, e4, 0.5, false) == Eigen::Vector3d(16136, 512, 512));
  // Clamped to the unsigned range.
  CHECK(interpolate_texel(e1, e2, e3, e4, 1.0, false)(0) == 31743.0);
}

TEST_CASE("soft decode") {
  const Bc6Mode mode;
  SUBCASE("zero endpoints decode to a constant") {
    BlockParams<double> p;
    p.alpha.setConstant(0.3);
    p.partition = 9;
    const double w0 = bits_to_half_sim(248.0);
    CHECK(w0 == doctest::Approx(248.0 * std::ldexp(1.0, -24)));
    const TexelBlock<double> out = decode_block_soft(p, mode);
    CHECK((out.array() == w0).all());
  }
  SUBCASE("zero alphas select the first endpoint of each subset") {
    std::mt19937_64 rng(1);
    BlockParams<double> p = random_params(rng);
    p.alpha.setZero();
    p.partition = 0;
    const TexelBlock<double> out = decode_block_soft(p, mode);
    for (int i = 0; i < 16; ++i) {
      const int j = (i % 4 >= 2) ? 2 : 0;
      for (int c = 0; c < 3; ++c)
        CHECK(out(c, i) == bits_to_half_sim(unquantize_endpoint(p.endpoints(c, j), mode)));
    }
  }
  SUBCASE("random blocks equal the scalar oracle exactly") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 2000; ++trial) {
      const BlockParams<double> p = random_params(rng);
      const TexelBlock<double> out = decode_block_soft(p, mode);
      for (int i = 0; i < 16; ++i)
        for (int c = 0; c < 3; ++c) REQUIRE(out(c, i) == oracle_texel(p, i, c));
    }
  }
  SUBCASE("float instantiation tracks double") {
    std::mt19937_64 rng(3);
    const BlockParams<double> p = random_params(rng);
    BlockParams<float> pf;
    pf.endpoints = p.endpoints.cast<float>();
    pf.alpha = p.alpha.cast<float>();
    pf.partition = p.partition;
    const TexelBlock<double> a = decode_block_soft(p, mode);
    const TexelBlock<float> b = decode_block_soft(pf, mode);
    CHECK(((a - b.cast<double>()).array().abs() <= 1e-3 * a.array().abs() + 1e-6).all());
  }
}

TEST_CASE("soft decode gradient matches central differences") {
  const Bc6Mode mode;
  const double step = 1e-3;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    BlockParams<double> p = random_params(rng);
    TexelBlock<double> weights;
    for (int i = 0; i < 16; ++i)
      for (int c = 0; c < 3; ++c) weights(c, i) = u(rng);
    const auto loss = [&](const BlockParams<double>& q) { return (decode_block_soft(q, mode).cwiseProduct(weights)).sum(); };
    const BlockParams<double> grad = decode_block_soft_backward(p, weights, mode);
    // Rounding noise of the difference quotient itself.
    const double noise = 1e-14 * decode_block_soft(p, mode).cwiseProduct(weights).cwiseAbs().sum() / step;

    // A texel is excluded when its pre-reinterpretation value sits within
    // 1.0 (plus the perturbation) of a piece boundary or the clamp.
    const auto near_kink = [&](int texel, int channel) {
      const bool second = partition_mask(p.partition)[texel];
      const int j = second ? 2 : 0;
      const double lo = unquantize_endpoint(p.endpoints(channel, j), mode);
      const double hi = unquantize_endpoint(p.endpoints(channel, j + 1), mode);
      const double v = lo + p.alpha(texel) * (hi - lo);
      const double margin = 1.0 + 496.0 * step + std::abs(hi - lo) * step;
      const double r = std::remainder(v, 1024.0);
      return std::abs(r) < margin || v < margin || v > 31743.0 - margin;
    };

    for (int j = 0; j < 4; ++j)
      for (int c = 0; c < 3; ++c) {
        bool skip = false;
        for (int i = 0; i < 16; ++i)
          if ((partition_mask(p.partition)[i] ? 2 : 0) == (j & 2) && near_kink(i, c)) skip = true;
        if (skip) continue;
        BlockParams<double> plus = p, minus = p;
        plus.endpoints(c, j) += step;
        minus.endpoints(c, j) -= step;
        const double fd = (loss(plus) - loss(minus)) / (2 * step);
        const double an = grad.endpoints(c, j);
        CHECK(std::abs(fd - an) <= 1e-3 * std::max(std::abs(fd), std::abs(an)) + noise);
        ++checked;
      }
    for (int i = 0; i < 16; ++i) {
      if (near_kink(i, 0) || near_kink(i, 1) || near_kink(i, 2)) continue;
      BlockParams<double> plus = p, minus = p;
      plus.alpha(i) += step;
      minus.alpha(i) -= step;
      const double fd = (loss(plus) - loss(minus)) / (2 * step);
      const double an = grad.alpha(i);
      CHECK(std::abs(fd - an) <= 1e-3 * std::max(std::abs(fd), std::abs(an)) + noise);
      ++checked;
    }
  }
  CHECK(checked > 3000);
}

TEST_CASE("quantize_block") {
  const Bc6Mode mode;
  SUBCASE("integer params are unchanged") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
      const BlockParams<double> q = from_codes(random_codes(rng), mode);
      CHECK(quantize_block(q, mode) == q);
    }
  }
  SUBCASE("alpha snapping") {
    BlockParams<double> p;
    p.alpha(0) = 0.5;  // exact tie between 27/64 and 37/64
    p.alpha(1) = 1.0;
    p.alpha(2) = 0.0;
    p.alpha(3) = 0.2;  // 12.8 -> 9
    p.alpha(4) = 0.22;  // 14.08 -> 18
    const BlockParams<double> q = quantize_block(p, mode);
    CHECK(q.alpha(0) == 37.0 / 64.0);
    CHECK(q.alpha(1) == 1.0);
    CHECK(q.alpha(2) == 0.0);
    CHECK(q.alpha(3) == 9.0 / 64.0);
    CHECK(q.alpha(4) == 18.0 / 64.0);
  }
  SUBCASE("endpoints round and clamp") {
    BlockParams<double> p;
    p.endpoints(0, 0) = 12.4;
    p.endpoints(1, 0) = 12.6;
    p.endpoints(2, 0) = 70.0;
    p.partition = 17;
    const BlockParams<double> q = quantize_block(p, mode);
    CHECK(q.endpoints(0, 0) == 12.0);
    CHECK(q.endpoints(1, 0) == 13.0);
    CHECK(q.endpoints(2, 0) == 63.0);
    CHECK(q.partition == 17);
  }
  SUBCASE("research profile uses the 16-entry table") {
    BlockParams<double> p;
    p.alpha(0) = 0.5;
    CHECK(quantize_block(p, Bc6Mode::research_q4()).alpha(0) == 34.0 / 64.0);
  }
}

TEST_CASE("pack and unpack") {
  SUBCASE("all-zero block") {
    const BlockCodes zero;
    const Bc6Word word = pack_block(zero);
    CHECK((word[0] & 0x1F) == 0x1E);
    CHECK(unpack_block(word) == zero);
  }
  SUBCASE("canonical random blocks round trip exactly") {
    std::mt19937_64 rng(5);
    int canonical = 0;
    for (int t = 0; t < 10000; ++t) {
      const BlockCodes codes = random_codes(rng);
      const BlockCodes canon = canonicalize(codes);
      REQUIRE(is_canonical(canon));
      REQUIRE(unpack_block(pack_block(canon)) == canon);
      REQUIRE(unpack_block(pack_block(codes)) == canon);
      REQUIRE(decode_block_hw(canon) == decode_block_hw(codes));
      canonical += is_canonical(codes);
    }
    CHECK(canonical > 0);
  }
  SUBCASE("corrupted mode bits") {
    Bc6Word word = pack_block(BlockCodes{});
    word[0] ^= 0x04;
    CHECK_THROWS_AS(unpack_block(word), FormatError);
    CHECK_THROWS_AS(decode_block_hw(word), FormatError);
    Bc6Word mode0{};
    CHECK_THROWS_AS(unpack_block(mode0), FormatError);
  }
  SUBCASE("codes and params convert both ways") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
      const BlockCodes codes = random_codes(rng);
      CHECK(to_codes(from_codes(codes)) == codes);
    }
  }
}

TEST_CASE("hardware decode") {
  SUBCASE("constant 1.0 block") {
    // Search codes whose integer decode hits 0x3C00: unquantize with the 0/max
    // special cases, 64-weight mix, final 31/64 scale.
    const int weights[8] = {0, 9, 18, 27, 37, 46, 55, 64};
    const auto unq = [](int e) { return e == 0 ? 0 : e == 63 ? 0xFFFF : ((e << 16) + 0x8000) >> 6; };
    BlockCodes codes;
    bool found = false;
    for (int a = 0; a < 64 && !found; ++a)
      for (int b = 0; b < 64 && !found; ++b)
        for (int w = 0; w < 4 && !found; ++w)
          if ((((unq(a) * (64 - weights[w]) + unq(b) * weights[w] + 32) >> 6) * 31 >> 6) == 0x3C00) {
            for (auto& ep : codes.endpoints) ep = {std::uint8_t(a), std::uint8_t(a), std::uint8_t(a)};
            codes.endpoints[1] = codes.endpoints[3] = {std::uint8_t(b), std::uint8_t(b), std::uint8_t(b)};
            codes.indices.fill(std::uint8_t(w));
            found = true;
          }
    REQUIRE(found);
    codes.partition = 13;
    const HalfBlock out = decode_block_hw(pack_block(codes));
    for (const auto& texel : out)
      for (std::uint16_t ch : texel) CHECK(half_value(ch) == 1.0);
  }
  SUBCASE("maximum endpoint") {
    BlockCodes codes;
    for (auto& ep : codes.endpoints) ep = {63, 63, 63};
    const HalfBlock out = decode_block_hw(pack_block(codes));
    for (const auto& texel : out)
      for (std::uint16_t ch : texel) {
        CHECK(ch == 0x7BFF);
        CHECK(half_value(ch) == 65504.0);
      }
  }
}

// Frozen regression bounds for soft vs hardware decode of quantized blocks,
// in the half-bit domain (pre-reinterpretation value). Interior codes differ
// only by integer rounding; codes 0 and 63 carry the hardware special cases.
constexpr double kSoftHwInteriorBitBound = 1.25;
constexpr double kSoftHwBitBound = 249.0;

TEST_CASE("soft and hardware decode agree on quantized blocks") {
  std::mt19937_64 rng(8);
  double max_interior = 0.0, max_all = 0.0, max_rel_interior = 0.0;
  for (int t = 0; t < 10000; ++t) {
    BlockCodes codes = random_codes(rng);
    const bool interior = t % 2 == 0;
    if (interior)
      for (auto& ep : codes.endpoints)
        for (auto& c : ep) c = std::uint8_t(std::clamp<int>(c, 1, 62));
    const BlockParams<double> q = from_codes(codes);
    const TexelBlock<double> soft = decode_block_soft(q);
    const HalfBlock hw = decode_block_hw(pack_block(codes));
    for (int i = 0; i < 16; ++i)
      for (int c = 0; c < 3; ++c) {
        const double bit_diff = std::abs(half_to_bits_sim(soft(c, i)) - hw[i][c]);
        max_all = std::max(max_all, bit_diff);
        if (interior) {
          max_interior = std::max(max_interior, bit_diff);
          const double hv = half_value(hw[i][c]);
          max_rel_interior = std::max(max_rel_interior, std::abs(soft(c, i) - hv) / std::max(hv, 1e-4));
        }
      }
  }
  MESSAGE("max |soft - hw| bits: interior " << max_interior << ", all " << max_all
                                            << "; interior relative " << max_rel_interior);
  CHECK(max_interior <= kSoftHwInteriorBitBound);
  CHECK(max_all <= kSoftHwBitBound);
  CHECK(max_rel_interior < 2e-3);
}

TEST_CASE("encode_block") {
  const Bc6Mode mode;
  SUBCASE("constant block") {
    TexelBlock<double> texels;
    texels.colwise() = Eigen::Vector3d(0.25, 0.5, 0.75);
    const BlockParams<double> p = encode_block(texels, mode);
    CHECK(block_error(p, texels, mode) < 1e-20);
    CHECK((p.endpoints.col(0) - p.endpoints.col(1)).norm() < 1e-9);
  }
  SUBCASE("collinear texels are recovered") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 50; ++t) {
      BlockParams<double> src = random_params(rng);
      src.endpoints.col(2) = src.endpoints.col(0);
      src.endpoints.col(3) = src.endpoints.col(1);
      const TexelBlock<double> texels = decode_block_soft(src, mode);
      const BlockParams<double> p = encode_block(texels, mode);
      const double err = block_error(p, texels, mode);
      CHECK(err <= 1e-10 * std::max(1.0, texels.squaredNorm()));
    }
  }
  SUBCASE("never worse than a single segment") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> v(0.0, 2.0);
    for (int t = 0; t < 300; ++t) {
      TexelBlock<double> texels;
      for (int i = 0; i < 16; ++i)
        for (int c = 0; c < 3; ++c) texels(c, i) = v(rng) * (t % 3 == 0 ? 100.0 : 1.0);
      const BlockParams<double> p = encode_block(texels, mode);
      REQUIRE(p.partition >= 0);
      REQUIRE(p.partition < 32);
      const double err = block_error(p, texels, mode);
      const double single = single_segment_error(texels);
      CHECK(err <= single * (1.0 + 1e-9) + 1e-15);
      CHECK((p.alpha.array() >= 0.0).all());
      CHECK((p.alpha.array() <= 1.0).all());
      CHECK((p.endpoints.array() >= 0.0).all());
      CHECK((p.endpoints.array() <= 63.0).all());
    }
  }
}
