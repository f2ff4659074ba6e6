#include "bcf/decoder.hpp"

#include <cstring>
#include <string>

#include "bcf/error.hpp"
#include "bcf/half.hpp"

namespace bcf {

namespace {

constexpr char kMagic[4] = {'B', 'C', 'F', 'W'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[at + std::size_t(i)]) << (8 * i);
  return v;
}

template <typename M>
void put_row_major(std::vector<std::uint8_t>& out, const M& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (!std::isfinite(v) || std::abs(v) > 65504.0)
        throw ExportError("decoder weight " + std::to_string(v) + " is not representable as fp16");
      const std::uint16_t h = float_to_half_bits(float(v));
      out.push_back(std::uint8_t(h & 0xFF));
      out.push_back(std::uint8_t(h >> 8));
    }
}

template <typename M>
void get_row_major(std::span<const std::uint8_t> in, std::size_t& at, M& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const std::uint16_t h = std::uint16_t(in[at] | (in[at + 1] << 8));
      at += 2;
      m(r, c) = half_bits_to_float(h);
    }
}

}  // namespace

std::vector<std::uint8_t> export_weights(const Decoder& mlp) {
  if (mlp.input_width() != kWeightBlobInputWidth)
    throw ExportError("weight blob requires input width 12, decoder has " + std::to_string(mlp.input_width()));
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kWeightBlobVersion);
  put_u32(out, std::uint32_t(mlp.hidden_width()));
  put_u32(out, std::uint32_t(mlp.output_width()));
  out.reserve(kHeaderBytes + 2 * mlp.parameter_count());
  put_row_major(out, mlp.W1);
  put_row_major(out, mlp.b1);
  put_row_major(out, mlp.W2);
  put_row_major(out, mlp.b2);
  return out;
}

Decoder import_weights(std::span<const std::uint8_t> blob) {
  if (blob.size() < kHeaderBytes || std::memcmp(blob.data(), kMagic, 4) != 0)
    throw FormatError("not a decoder weight blob (bad magic)");
  const std::uint32_t version = get_u32(blob, 4);
  if (version != kWeightBlobVersion) throw FormatError("unsupported weight blob version " + std::to_string(version));
  const std::uint32_t hidden = get_u32(blob, 8), output = get_u32(blob, 12);
  if (hidden == 0 || output == 0 || hidden > 4096 || output > 4096)
    throw FormatError("implausible decoder shape " + std::to_string(hidden) + "/" + std::to_string(output));
  const std::size_t count = std::size_t(hidden) * kWeightBlobInputWidth + hidden + std::size_t(output) * hidden + output;
  if (blob.size() != kHeaderBytes + 2 * count)
    throw FormatError("weight blob is " + std::to_string(blob.size()) + " bytes, expected " +
                      std::to_string(kHeaderBytes + 2 * count));
  Decoder mlp(kWeightBlobInputWidth, int(hidden), int(output));
  std::size_t at = kHeaderBytes;
  get_row_major(blob, at, mlp.W1);
  get_row_major(blob, at, mlp.b1);
  get_row_major(blob, at, mlp.W2);
  get_row_major(blob, at, mlp.b2);
  return mlp;
}

}  // namespace bcf
