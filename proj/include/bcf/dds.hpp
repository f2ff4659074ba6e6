#pragma once

// DDS container for BC6H (unsigned half) textures with a DX10 header.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bcf/bc6.hpp"

namespace bcf {

inline constexpr std::uint32_t kDxgiFormatBc6hUf16 = 95;
inline constexpr std::size_t kDdsHeaderBytes = 4 + 124 + 20;

struct DdsTexture {
  int width = 0;
  int height = 0;
  /// mips[m] holds the blocks of level m in row-major block order.
  std::vector<std::vector<Bc6Word>> mips;

  int mip_count() const { return int(mips.size()); }
  friend bool operator==(const DdsTexture&, const DdsTexture&) = default;
};

/// Blocks in level m: max(w >> m, 4) / 4 * max(h >> m, 4) / 4.
std::size_t dds_mip_blocks(int width, int height, int mip);
/// Header plus every level's payload.
std::size_t dds_file_bytes(int width, int height, int mip_count);

std::vector<std::uint8_t> encode_dds(const DdsTexture& texture);
/// Throws FormatError on bad magic, a non-BC6H format or truncated payloads.
DdsTexture decode_dds(std::span<const std::uint8_t> bytes);

void write_dds(const std::filesystem::path& path, const DdsTexture& texture);
DdsTexture read_dds(const std::filesystem::path& path);

}  // namespace bcf
