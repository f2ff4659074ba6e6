#include "bcf/dds.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "bcf/error.hpp"

namespace bcf {

namespace {

constexpr std::uint32_t kMagic = 0x20534444;  // "DDS "
constexpr std::uint32_t kFourCcDx10 = 0x30315844;  // "DX10"

constexpr std::uint32_t DDSD_CAPS = 0x1, DDSD_HEIGHT = 0x2, DDSD_WIDTH = 0x4, DDSD_PIXELFORMAT = 0x1000,
                        DDSD_MIPMAPCOUNT = 0x20000, DDSD_LINEARSIZE = 0x80000;
constexpr std::uint32_t DDPF_FOURCC = 0x4;
constexpr std::uint32_t DDSCAPS_COMPLEX = 0x8, DDSCAPS_TEXTURE = 0x1000, DDSCAPS_MIPMAP = 0x400000;
constexpr std::uint32_t kDimensionTexture2D = 3;

void put(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint32_t get(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[at + std::size_t(i)]) << (8 * i);
  return v;
}

}  // namespace

std::size_t dds_mip_blocks(int width, int height, int mip) {
  const int w = std::max(width >> mip, 4), h = std::max(height >> mip, 4);
  return std::size_t(w / 4) * std::size_t(h / 4);
}

std::size_t dds_file_bytes(int width, int height, int mip_count) {
  std::size_t n = kDdsHeaderBytes;
  for (int m = 0; m < mip_count; ++m) n += 16 * dds_mip_blocks(width, height, m);
  return n;
}

std::vector<std::uint8_t> encode_dds(const DdsTexture& t) {
  if (t.width <= 0 || t.height <= 0 || t.width % 4 || t.height % 4)
    throw FormatError("DDS base dimensions must be positive multiples of 4");
  if (t.mips.empty()) throw FormatError("DDS texture has no mip levels");
  for (int m = 0; m < t.mip_count(); ++m)
    if (t.mips[std::size_t(m)].size() != dds_mip_blocks(t.width, t.height, m))
      throw FormatError("mip " + std::to_string(m) + " has " + std::to_string(t.mips[std::size_t(m)].size()) +
                        " blocks, expected " + std::to_string(dds_mip_blocks(t.width, t.height, m)));

  std::vector<std::uint8_t> out;
  out.reserve(dds_file_bytes(t.width, t.height, t.mip_count()));
  put(out, kMagic);
  // DDS_HEADER
  put(out, 124);
  put(out, DDSD_CAPS | DDSD_HEIGHT | DDSD_WIDTH | DDSD_PIXELFORMAT | DDSD_MIPMAPCOUNT | DDSD_LINEARSIZE);
  put(out, std::uint32_t(t.height));
  put(out, std::uint32_t(t.width));
  put(out, std::uint32_t(16 * dds_mip_blocks(t.width, t.height, 0)));
  put(out, 0);  // depth
  put(out, std::uint32_t(t.mip_count()));
  for (int i = 0; i < 11; ++i) put(out, 0);
  // DDS_PIXELFORMAT
  put(out, 32);
  put(out, DDPF_FOURCC);
  put(out, kFourCcDx10);
  for (int i = 0; i < 5; ++i) put(out, 0);
  put(out, DDSCAPS_TEXTURE | (t.mip_count() > 1 ? DDSCAPS_MIPMAP | DDSCAPS_COMPLEX : 0));
  for (int i = 0; i < 4; ++i) put(out, 0);  // caps2..4, reserved2
  // DDS_HEADER_DXT10
  put(out, kDxgiFormatBc6hUf16);
  put(out, kDimensionTexture2D);
  put(out, 0);  // misc flags
  put(out, 1);  // array size
  put(out, 0);  // misc flags 2
  for (const auto& level : t.mips)
    for (const Bc6Word& w : level) out.insert(out.end(), w.begin(), w.end());
  return out;
}

DdsTexture decode_dds(std::span<const std::uint8_t> in) {
  if (in.size() < kDdsHeaderBytes) throw FormatError("DDS file truncated inside the header");
  if (get(in, 0) != kMagic) throw FormatError("not a DDS file (bad magic)");
  if (get(in, 4) != 124) throw FormatError("unexpected DDS header size");
  if (get(in, 80) != DDPF_FOURCC || get(in, 84) != kFourCcDx10)
    throw FormatError("DDS file lacks the DX10 extension header");
  const std::uint32_t format = get(in, 128);
  if (format != kDxgiFormatBc6hUf16)
    throw FormatError("unsupported DXGI format " + std::to_string(format) + " (expected 95, BC6H_UF16)");
  if (get(in, 132) != kDimensionTexture2D || get(in, 140) != 1)
    throw FormatError("only single 2D textures are supported");

  DdsTexture t;
  t.height = int(get(in, 12));
  t.width = int(get(in, 16));
  const std::uint32_t flags = get(in, 8);
  const int mips = (flags & DDSD_MIPMAPCOUNT) ? std::max<int>(1, int(get(in, 28))) : 1;
  if (t.width <= 0 || t.height <= 0 || t.width % 4 || t.height % 4 || t.width > 65536 || t.height > 65536 || mips > 17)
    throw FormatError("implausible DDS dimensions " + std::to_string(t.width) + "x" + std::to_string(t.height));
  const std::size_t expected = dds_file_bytes(t.width, t.height, mips);
  if (in.size() < expected)
    throw FormatError("DDS payload truncated: " + std::to_string(in.size()) + " bytes, expected " +
                      std::to_string(expected));
  if (in.size() > expected) throw FormatError("DDS file has " + std::to_string(in.size() - expected) + " trailing bytes");

  std::size_t at = kDdsHeaderBytes;
  for (int m = 0; m < mips; ++m) {
    std::vector<Bc6Word> level(dds_mip_blocks(t.width, t.height, m));
    for (Bc6Word& w : level) {
      std::memcpy(w.data(), in.data() + at, 16);
      at += 16;
    }
    t.mips.push_back(std::move(level));
  }
  return t;
}

void write_dds(const std::filesystem::path& path, const DdsTexture& texture) {
  const std::vector<std::uint8_t> bytes = encode_dds(texture);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

DdsTexture read_dds(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dds(bytes);
}

}  // namespace bcf
