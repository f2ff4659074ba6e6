#include "bcf/bc6.hpp"

#include <limits>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

namespace bcf {
namespace {

// DirectX BC6H/BC7 two-subset partitions: bit i set means texel i is in the
// second subset.
constexpr std::array<std::uint16_t, kPartitionCount> kPartitionBits = {
    0xCCCC, 0x8888, 0xEEEE, 0xECC8, 0xC880, 0xFEEC, 0xFEC8, 0xEC80,
    0xC800, 0xFFEC, 0xFE80, 0xE800, 0xFFE8, 0xFF00, 0xFFF0, 0xF000,
    0xF710, 0x008E, 0x7100, 0x08CE, 0x008C, 0x7310, 0x3100, 0x8CCE,
    0x088C, 0x3110, 0x6666, 0x366C, 0x17E8, 0x0FF0, 0x718E, 0x399C,
};

constexpr std::array<std::uint8_t, kPartitionCount> kAnchors = {
    15, 15, 15, 15, 15, 15, 15, 15, 15, 15, 15, 15, 15, 15, 15, 15,
    15, 2,  8,  2,  2,  8,  8,  15, 2,  8,  2,  2,  8,  8,  2,  2,
};

constexpr std::array<int, 8> kWeights3 = {0, 9, 18, 27, 37, 46, 55, 64};
constexpr std::array<int, 16> kWeights4 = {0, 4, 9, 13, 17, 21, 26, 30, 34, 38, 43, 47, 51, 55, 60, 64};

std::array<PartitionMask, kPartitionCount> build_masks() {
  std::array<PartitionMask, kPartitionCount> masks{};
  for (int k = 0; k < kPartitionCount; ++k)
    for (int i = 0; i < kTexelsPerBlock; ++i) masks[k][i] = (kPartitionBits[k] >> i) & 1u;
  return masks;
}

const std::array<PartitionMask, kPartitionCount> kMasks = build_masks();

// Header layout of mode 0x1E (6.6.6.6, two regions): 82 bits, least
// significant first. Field W/X/Y/Z are e1/e2/e3/e4.
enum class Field : std::uint8_t { M, D, RW, RX, RY, RZ, GW, GX, GY, GZ, BW, BX, BY, BZ };

struct HeaderBit {
  Field field;
  std::uint8_t bit;
};

using F = Field;
constexpr HeaderBit kHeader[82] = {
    {F::M, 0},  {F::M, 1},  {F::M, 2},  {F::M, 3},  {F::M, 4},  {F::RW, 0}, {F::RW, 1}, {F::RW, 2}, {F::RW, 3},
    {F::RW, 4}, {F::RW, 5}, {F::GZ, 4}, {F::BZ, 0}, {F::BZ, 1}, {F::BY, 4}, {F::GW, 0}, {F::GW, 1}, {F::GW, 2},
    {F::GW, 3}, {F::GW, 4}, {F::GW, 5}, {F::GY, 5}, {F::BY, 5}, {F::BZ, 2}, {F::GY, 4}, {F::BW, 0}, {F::BW, 1},
    {F::BW, 2}, {F::BW, 3}, {F::BW, 4}, {F::BW, 5}, {F::GZ, 5}, {F::BZ, 3}, {F::BZ, 5}, {F::BZ, 4}, {F::RX, 0},
    {F::RX, 1}, {F::RX, 2}, {F::RX, 3}, {F::RX, 4}, {F::RX, 5}, {F::GY, 0}, {F::GY, 1}, {F::GY, 2}, {F::GY, 3},
    {F::GX, 0}, {F::GX, 1}, {F::GX, 2}, {F::GX, 3}, {F::GX, 4}, {F::GX, 5}, {F::GZ, 0}, {F::GZ, 1}, {F::GZ, 2},
    {F::GZ, 3}, {F::BX, 0}, {F::BX, 1}, {F::BX, 2}, {F::BX, 3}, {F::BX, 4}, {F::BX, 5}, {F::BY, 0}, {F::BY, 1},
    {F::BY, 2}, {F::BY, 3}, {F::RY, 0}, {F::RY, 1}, {F::RY, 2}, {F::RY, 3}, {F::RY, 4}, {F::RY, 5}, {F::RZ, 0},
    {F::RZ, 1}, {F::RZ, 2}, {F::RZ, 3}, {F::RZ, 4}, {F::RZ, 5}, {F::D, 0},  {F::D, 1},  {F::D, 2},  {F::D, 3},
    {F::D, 4},
};

constexpr int kHeaderBits = 82;
constexpr unsigned kModeBits = 0x1E;

// (endpoint, channel) addressed by a header field; endpoint -1 for M and D.
constexpr std::pair<int, int> field_slot(Field f) {
  switch (f) {
    case F::RW: return {0, 0};
    case F::GW: return {0, 1};
    case F::BW: return {0, 2};
    case F::RX: return {1, 0};
    case F::GX: return {1, 1};
    case F::BX: return {1, 2};
    case F::RY: return {2, 0};
    case F::GY: return {2, 1};
    case F::BY: return {2, 2};
    case F::RZ: return {3, 0};
    case F::GZ: return {3, 1};
    case F::BZ: return {3, 2};
    default: return {-1, -1};
  }
}

class BitWriter {
 public:
  explicit BitWriter(Bc6Word& word) : word_(word) { word_.fill(0); }
  void put(unsigned value, int count) {
    for (int i = 0; i < count; ++i, ++pos_)
      if ((value >> i) & 1u) word_[pos_ >> 3] |= std::uint8_t(1u << (pos_ & 7));
  }

 private:
  Bc6Word& word_;
  int pos_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const Bc6Word& word) : word_(word) {}
  unsigned get(int count) {
    unsigned value = 0;
    for (int i = 0; i < count; ++i, ++pos_) value |= unsigned((word_[pos_ >> 3] >> (pos_ & 7)) & 1u) << i;
    return value;
  }
  int position() const { return pos_; }

 private:
  const Bc6Word& word_;
  int pos_ = 0;
};

int hw_unquantize(int code) {
  if (code == 0) return 0;
  if (code == 63) return 0xFFFF;
  return ((code << 16) + 0x8000) >> 6;
}

int nearest_weight_index(double alpha, std::span<const int> weights) {
  const double target = alpha * 64.0;
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < int(weights.size()); ++i) {
    const double dist = std::abs(double(weights[i]) - target);
    if (dist <= best_dist) {  // later (larger) weight wins ties
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

// --- encoder helpers --------------------------------------------------------

double endpoint_from_bits(double v, const Bc6Mode& mode) {
  const double offset = mode.scale() * 32768.0 / double(1 << mode.endpoint_bits);
  return (v - offset) / unquantize_slope(mode);
}

struct SubsetFit {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
};

// Principal-axis line through the subset mean in the bit domain, endpoints at
// the extreme projections, mapped back to the quantization domain.
SubsetFit fit_line(const Eigen::Matrix3Xd& bits, const Bc6Mode& mode) {
  const Eigen::Vector3d mean = bits.rowwise().mean();
  const Eigen::Matrix3Xd centered = bits.colwise() - mean;
  const Eigen::Matrix3d cov = centered * centered.transpose();
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  if (cov.trace() > 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    axis = solver.eigenvectors().col(2);
  }
  const Eigen::RowVectorXd t = axis.transpose() * centered;
  const double tmin = t.size() ? t.minCoeff() : 0.0;
  const double tmax = t.size() ? t.maxCoeff() : 0.0;
  SubsetFit fit;
  const double emax = mode.max_endpoint();
  for (int c = 0; c < 3; ++c) {
    fit.lo(c) = std::clamp(endpoint_from_bits(mean(c) + tmin * axis(c), mode), 0.0, emax);
    fit.hi(c) = std::clamp(endpoint_from_bits(mean(c) + tmax * axis(c), mode), 0.0, emax);
  }
  return fit;
}

// Alphas by projection onto the unquantized segment, and the value-domain
// squared error of the result over the given texels.
double assign_alphas(const SubsetFit& fit, const Eigen::Matrix3Xd& bits, const Eigen::Matrix3Xd& values,
                     std::span<const int> texels, Eigen::Matrix<double, kTexelsPerBlock, 1>& alpha,
                     const Bc6Mode& mode) {
  Eigen::Vector3d lo, hi;
  for (int c = 0; c < 3; ++c) {
    lo(c) = unquantize_endpoint(fit.lo(c), mode);
    hi(c) = unquantize_endpoint(fit.hi(c), mode);
  }
  const Eigen::Vector3d dir = hi - lo;
  const double len2 = dir.squaredNorm();
  double error = 0.0;
  for (int j = 0; j < int(texels.size()); ++j) {
    double a = len2 > 1e-12 ? dir.dot(bits.col(j) - lo) / len2 : 0.0;
    a = std::clamp(a, 0.0, 1.0);
    alpha(texels[j]) = a;
    for (int c = 0; c < 3; ++c) {
      const double y = std::clamp(lo(c) + a * dir(c), mode.min_value(), mode.max_value());
      const double d = bits_to_half_sim(y) - values(c, j);
      error += d * d;
    }
  }
  return error;
}

}  // namespace

const PartitionMask& partition_mask(int k) {
  if (k < 0 || k >= kPartitionCount) throw DomainError("partition id out of range: " + std::to_string(k));
  return kMasks[k];
}

int partition_anchor(int k) {
  if (k < 0 || k >= kPartitionCount) throw DomainError("partition id out of range: " + std::to_string(k));
  return kAnchors[k];
}

std::span<const int> interpolation_weights(int index_bits) {
  if (index_bits == 3) return kWeights3;
  if (index_bits == 4) return kWeights4;
  throw DomainError("unsupported index bit width: " + std::to_string(index_bits));
}

double half_to_bits_sim(double w) {
  if (!(w > 0.0)) return 0.0;
  if (w >= 65504.0) return 31743.0;
  if (w < std::ldexp(1.0, -14)) return w * std::ldexp(1.0, 24);
  int exponent = 0;
  const double mant = std::frexp(w, &exponent);  // w = mant * 2^exponent, mant in [0.5, 1)
  const int h = exponent - 1 + 14;               // w = 2^(h-14) * (1 + f)
  return 1024.0 * (2.0 * mant + double(h));
}

void project_block(BlockParams<double>& params, const Bc6Mode& mode) {
  params.endpoints = params.endpoints.cwiseMax(0.0).cwiseMin(double(mode.max_endpoint()));
  params.alpha = params.alpha.cwiseMax(0.0).cwiseMin(1.0);
}

BlockParams<double> quantize_block(const BlockParams<double>& params, const Bc6Mode& mode) {
  const auto weights = interpolation_weights(mode.index_bits);
  BlockParams<double> q;
  q.partition = params.partition;
  for (int j = 0; j < kEndpointCount; ++j)
    for (int c = 0; c < 3; ++c)
      q.endpoints(c, j) = std::clamp(std::round(params.endpoints(c, j)), 0.0, double(mode.max_endpoint()));
  for (int i = 0; i < kTexelsPerBlock; ++i)
    q.alpha(i) = weights[nearest_weight_index(params.alpha(i), weights)] / 64.0;
  return q;
}

BlockCodes to_codes(const BlockParams<double>& quantized, const Bc6Mode& mode) {
  const auto weights = interpolation_weights(mode.index_bits);
  BlockCodes codes;
  partition_mask(quantized.partition);
  codes.partition = std::uint8_t(quantized.partition);
  for (int j = 0; j < kEndpointCount; ++j)
    for (int c = 0; c < 3; ++c) {
      const double e = std::clamp(std::round(quantized.endpoints(c, j)), 0.0, double(mode.max_endpoint()));
      codes.endpoints[j][c] = std::uint8_t(e);
    }
  for (int i = 0; i < kTexelsPerBlock; ++i)
    codes.indices[i] = std::uint8_t(nearest_weight_index(quantized.alpha(i), weights));
  return codes;
}

BlockParams<double> from_codes(const BlockCodes& codes, const Bc6Mode& mode) {
  const auto weights = interpolation_weights(mode.index_bits);
  BlockParams<double> p;
  p.partition = codes.partition;
  partition_mask(p.partition);
  for (int j = 0; j < kEndpointCount; ++j)
    for (int c = 0; c < 3; ++c) p.endpoints(c, j) = codes.endpoints[j][c];
  for (int i = 0; i < kTexelsPerBlock; ++i) {
    if (codes.indices[i] >= weights.size()) throw DomainError("index exceeds the weight table");
    p.alpha(i) = weights[codes.indices[i]] / 64.0;
  }
  return p;
}

bool is_canonical(const BlockCodes& codes, const Bc6Mode& mode) {
  const int high = 1 << (mode.index_bits - 1);
  return codes.indices[0] < high && codes.indices[partition_anchor(codes.partition)] < high;
}

BlockCodes canonicalize(const BlockCodes& codes, const Bc6Mode& mode) {
  const int high = 1 << (mode.index_bits - 1);
  const int top = mode.index_count() - 1;
  const PartitionMask& mask = partition_mask(codes.partition);
  BlockCodes out = codes;
  const int anchors[2] = {0, partition_anchor(codes.partition)};
  for (int subset = 0; subset < 2; ++subset) {
    if (codes.indices[anchors[subset]] < high) continue;
    std::swap(out.endpoints[2 * subset], out.endpoints[2 * subset + 1]);
    for (int i = 0; i < kTexelsPerBlock; ++i)
      if (int(mask[i]) == subset) out.indices[i] = std::uint8_t(top - codes.indices[i]);
  }
  return out;
}

Bc6Word pack_block(const BlockCodes& input) {
  const BlockCodes codes = canonicalize(input);
  Bc6Word word;
  BitWriter writer(word);
  for (const HeaderBit& hb : kHeader) {
    unsigned bit = 0;
    if (hb.field == F::M) {
      bit = (kModeBits >> hb.bit) & 1u;
    } else if (hb.field == F::D) {
      bit = (codes.partition >> hb.bit) & 1u;
    } else {
      const auto [endpoint, channel] = field_slot(hb.field);
      if (codes.endpoints[endpoint][channel] > 63) throw DomainError("endpoint code exceeds 6 bits");
      bit = (codes.endpoints[endpoint][channel] >> hb.bit) & 1u;
    }
    writer.put(bit, 1);
  }
  const int anchor = partition_anchor(codes.partition);
  for (int i = 0; i < kTexelsPerBlock; ++i) {
    if (codes.indices[i] > 7) throw DomainError("index exceeds 3 bits");
    writer.put(codes.indices[i], (i == 0 || i == anchor) ? 2 : 3);
  }
  return word;
}

BlockCodes unpack_block(const Bc6Word& word) {
  BitReader reader(word);
  unsigned mode = reader.get(2);
  if (mode > 1) mode |= reader.get(3) << 2;
  if (mode != kModeBits)
    throw FormatError("unsupported BC6H block mode " + std::to_string(mode) + " (only mode 30 / 0x1E is supported)");

  BlockCodes codes;
  while (reader.position() < kHeaderBits) {
    const HeaderBit& hb = kHeader[reader.position()];
    const unsigned bit = reader.get(1);
    if (!bit) continue;
    if (hb.field == F::D) {
      codes.partition = std::uint8_t(codes.partition | (1u << hb.bit));
    } else {
      const auto [endpoint, channel] = field_slot(hb.field);
      codes.endpoints[endpoint][channel] = std::uint8_t(codes.endpoints[endpoint][channel] | (1u << hb.bit));
    }
  }
  const int anchor = partition_anchor(codes.partition);
  for (int i = 0; i < kTexelsPerBlock; ++i)
    codes.indices[i] = std::uint8_t(reader.get((i == 0 || i == anchor) ? 2 : 3));
  return codes;
}

HalfBlock decode_block_hw(const BlockCodes& codes) {
  const PartitionMask& mask = partition_mask(codes.partition);
  HalfBlock out{};
  for (int i = 0; i < kTexelsPerBlock; ++i) {
    const int lo = mask[i] ? 2 : 0;
    const int w = kWeights3.at(codes.indices[i]);
    for (int c = 0; c < 3; ++c) {
      const int a = hw_unquantize(codes.endpoints[lo][c]);
      const int b = hw_unquantize(codes.endpoints[lo + 1][c]);
      const int mixed = (a * (64 - w) + b * w + 32) >> 6;
      out[i][c] = std::uint16_t((mixed * 31) >> 6);
    }
  }
  return out;
}

HalfBlock decode_block_hw(const Bc6Word& word) { return decode_block_hw(unpack_block(word)); }

double block_error(const BlockParams<double>& params, const TexelBlock<double>& texels, const Bc6Mode& mode) {
  return (decode_block_soft(params, mode) - texels).squaredNorm();
}

BlockParams<double> encode_block(const TexelBlock<double>& texels, const Bc6Mode& mode) {
  Eigen::Matrix3Xd bits(3, kTexelsPerBlock);
  for (int i = 0; i < kTexelsPerBlock; ++i)
    for (int c = 0; c < 3; ++c) bits(c, i) = half_to_bits_sim(texels(c, i));

  // One segment through all sixteen texels; every subset may fall back to it,
  // so no partition ever does worse than the single-segment fit.
  const SubsetFit global = fit_line(bits, mode);

  BlockParams<double> best;
  double best_error = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kPartitionCount; ++k) {
    const PartitionMask& mask = kMasks[k];
    BlockParams<double> candidate;
    candidate.partition = k;
    double total = 0.0;
    for (int subset = 0; subset < 2; ++subset) {
      std::array<int, kTexelsPerBlock> members{};
      int count = 0;
      for (int i = 0; i < kTexelsPerBlock; ++i)
        if (int(mask[i]) == subset) members[count++] = i;
      const std::span<const int> ids(members.data(), count);
      Eigen::Matrix3Xd sub_bits(3, count), sub_values(3, count);
      for (int j = 0; j < count; ++j) {
        sub_bits.col(j) = bits.col(ids[j]);
        sub_values.col(j) = texels.col(ids[j]);
      }
      const SubsetFit own = fit_line(sub_bits, mode);
      Eigen::Matrix<double, kTexelsPerBlock, 1> alpha_own = candidate.alpha, alpha_global = candidate.alpha;
      const double err_own = assign_alphas(own, sub_bits, sub_values, ids, alpha_own, mode);
      const double err_global = assign_alphas(global, sub_bits, sub_values, ids, alpha_global, mode);
      const bool use_own = err_own <= err_global;
      const SubsetFit& chosen = use_own ? own : global;
      candidate.alpha = use_own ? alpha_own : alpha_global;
      candidate.endpoints.col(2 * subset) = chosen.lo;
      candidate.endpoints.col(2 * subset + 1) = chosen.hi;
      total += use_own ? err_own : err_global;
    }
    if (total < best_error) {
      best_error = total;
      best = candidate;
    }
  }
  return best;
}

}  // namespace bcf
