#include "bcf/assets.hpp"

#include <cmath>
#include <random>
#include <string>

#include "bcf/error.hpp"
#include "bcf/image_io.hpp"

namespace bcf {

namespace {

ImageF read_with_channels(const std::filesystem::path& path, int min_channels) {
  if (!std::filesystem::exists(path)) throw IoError("missing texture: " + path.string());
  ImageF img = read_image(path);
  if (img.channels() < min_channels)
    throw ConfigError(path.string() + " has " + std::to_string(img.channels()) + " channels, need " +
                      std::to_string(min_channels));
  return img;
}

}  // namespace

MaterialStack load_material(const std::filesystem::path& albedo, const std::filesystem::path& normal,
                            const std::filesystem::path& arm) {
  const ImageF a = read_with_channels(albedo, 3);
  const ImageF n = read_with_channels(normal, 2);
  const ImageF r = read_with_channels(arm, 3);
  for (const auto* p : {&n, &r}) {
    if (p->width != a.width || p->height != a.height)
      throw ConfigError("texture size mismatch: " + albedo.string() + " is " + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + ", " + (p == &n ? normal : arm).string() + " is " +
                        std::to_string(p->width) + "x" + std::to_string(p->height));
  }
  ImageF base(kMaterialChannels, a.width, a.height);
  base.pixels.topRows(3) = a.pixels.topRows(3);
  base.pixels.middleRows(3, 2) = n.pixels.topRows(2);
  base.pixels.bottomRows(3) = r.pixels.topRows(3);
  base.pixels = base.pixels.cwiseMax(0.0f).cwiseMin(1.0f);
  try {
    return build_mip_pyramid(base);
  } catch (const ConfigError& e) {
    throw ConfigError(albedo.string() + ": " + e.what());
  }
}

MaterialViews split_material(const ImageF& level) {
  if (level.channels() != kMaterialChannels) throw ConfigError("expected an 8-channel material image");
  MaterialViews v{ImageF(3, level.width, level.height), ImageF(3, level.width, level.height),
                  ImageF(3, level.width, level.height)};
  v.albedo.pixels = level.pixels.topRows(3);
  v.normal.pixels.topRows(2) = level.pixels.middleRows(3, 2);
  for (Eigen::Index i = 0; i < level.pixels.cols(); ++i) {
    const float nx = 2.0f * level.pixels(3, i) - 1.0f, ny = 2.0f * level.pixels(4, i) - 1.0f;
    v.normal.pixels(2, i) = 0.5f + 0.5f * std::sqrt(std::max(0.0f, 1.0f - nx * nx - ny * ny));
  }
  v.arm.pixels = level.pixels.bottomRows(3);
  return v;
}

ImageF synthetic_material(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  struct Disc {
    double x, y, r;
    Eigen::Matrix<double, 8, 1> value;
  };
  std::vector<Disc> discs(4);
  for (Disc& disc : discs) {
    disc.x = d(rng);
    disc.y = d(rng);
    disc.r = 0.08 + 0.15 * d(rng);
    for (int c = 0; c < 8; ++c) disc.value(c) = d(rng);
  }
  Eigen::Matrix<double, 8, 1> freq, phase, base, slope_x, slope_y;
  for (int c = 0; c < 8; ++c) {
    freq(c) = 2.0 + 6.0 * d(rng);
    phase(c) = 6.283185307179586 * d(rng);
    base(c) = 0.3 + 0.4 * d(rng);
    slope_x(c) = 0.3 * (d(rng) - 0.5);
    slope_y(c) = 0.3 * (d(rng) - 0.5);
  }
  ImageF img(kMaterialChannels, size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size, v = (y + 0.5) / size;
      Eigen::Matrix<double, 8, 1> value;
      for (int c = 0; c < 8; ++c)
        value(c) = base(c) + slope_x(c) * (u - 0.5) + slope_y(c) * (v - 0.5) +
                   0.1 * std::sin(freq(c) * 6.283185307179586 * u + phase(c)) * std::cos(freq(c) * 3.0 * v);
      for (const Disc& disc : discs) {
        const double dist = std::hypot(u - disc.x, v - disc.y);
        const double w = std::clamp((disc.r - dist) / 0.02, 0.0, 1.0);
        value = (1.0 - w) * value + w * disc.value;
      }
      img.at(x, y) = value.cwiseMax(0.0).cwiseMin(1.0).cast<float>();
    }
  return img;
}

void write_material_pngs(const std::filesystem::path& dir, const ImageF& level) {
  std::filesystem::create_directories(dir);
  const MaterialViews v = split_material(level);
  write_png(dir / "albedo.png", v.albedo);
  write_png(dir / "normal.png", v.normal);
  write_png(dir / "arm.png", v.arm);
}

}  // namespace bcf
