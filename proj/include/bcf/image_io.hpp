#pragma once

#include <filesystem>

#include "bcf/image.hpp"

namespace bcf {

/// Reads PNG (8 or 16 bit; gray, gray+alpha, RGB, RGBA, palette) or OpenEXR
/// (half or float RGB[A]) by extension. PNG values are scaled to [0, 1] with
/// no colour-space conversion. Throws IoError naming the file.
ImageF read_image(const std::filesystem::path& path);

/// 1 to 4 channels, values clamped to [0, 1]; bit_depth 8 or 16.
void write_png(const std::filesystem::path& path, const ImageF& image, int bit_depth = 8);
/// Half-float RGB (or RGBA for 4 channels); 1 and 2 channel images pad with zeros.
void write_exr(const std::filesystem::path& path, const ImageF& image);

}  // namespace bcf
