#pragma once

#include <cstdint>
#include <filesystem>

#include "bcf/image.hpp"
#include "bcf/material.hpp"

namespace bcf {

/// Assembles the 8-channel stack from albedo (RGB), normal (x, y kept) and
/// ARM (ambient occlusion, roughness, metalness) textures and builds its
/// mips. Values are used as stored (linear, no sRGB decode). Throws IoError
/// or ConfigError naming the offending file.
MaterialStack load_material(const std::filesystem::path& albedo, const std::filesystem::path& normal,
                            const std::filesystem::path& arm);

/// Splits an 8-channel image into albedo RGB, normal RGB (z rebuilt from x, y)
/// and ARM RGB views.
struct MaterialViews {
  ImageF albedo;
  ImageF normal;
  ImageF arm;
};
MaterialViews split_material(const ImageF& stack_level);

/// Procedural 8-channel material: smooth ramps, a few soft discs and
/// sinusoidal detail. Deterministic for a given seed.
ImageF synthetic_material(int size, std::uint64_t seed);

/// Writes albedo.png, normal.png and arm.png (8-bit) into `dir`.
void write_material_pngs(const std::filesystem::path& dir, const ImageF& stack_level);

}  // namespace bcf
