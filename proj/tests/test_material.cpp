#include <random>

#include "bcf/error.hpp"
#include "bcf/material.hpp"
#include "doctest.h"

using namespace bcf;

namespace {

ImageF random_image(int channels, int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  ImageF img(channels, size, size);
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) img.pixels.data()[i] = d(rng);
  return img;
}

}  // namespace

TEST_CASE("build_mip_pyramid") {
  std::mt19937_64 rng(1);
  SUBCASE("levels and sizes") {
    const MaterialStack s = build_mip_pyramid(ImageF(8, 256, 256));
    CHECK(s.mip_count() == 7);
    CHECK(s.mips.back().width == 4);
    CHECK(s.channels() == 8);
  }
  SUBCASE("constant image stays constant") {
    ImageF img(8, 32, 32);
    img.pixels.setConstant(0.375f);
    for (const ImageF& m : build_mip_pyramid(img).mips) CHECK((m.pixels.array() == 0.375f).all());
  }
  SUBCASE("2x2 checkerboard averages out") {
    ImageF img(1, 16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) img.at(x, y)(0) = ((x + y) % 2) ? 0.75f : 0.25f;
    const MaterialStack s = build_mip_pyramid(img);
    CHECK((s.mips[1].pixels.array() == 0.5f).all());
  }
  SUBCASE("first mip is the 2x2 mean") {
    const ImageF img = random_image(3, 8, rng);
    const MaterialStack s = build_mip_pyramid(img);
    for (int c = 0; c < 3; ++c) {
      const double mean = (double(img.at(0, 0)(c)) + img.at(1, 0)(c) + img.at(0, 1)(c) + img.at(1, 1)(c)) / 4.0;
      CHECK(s.mips[1].at(0, 0)(c) == doctest::Approx(mean).epsilon(1e-6));
    }
  }
  SUBCASE("bad sizes") {
    CHECK_THROWS_AS(build_mip_pyramid(ImageF(8, 48, 48)), ConfigError);
    CHECK_THROWS_AS(build_mip_pyramid(ImageF(8, 32, 16)), ConfigError);
    CHECK_THROWS_AS(build_mip_pyramid(ImageF(8, 2, 2)), ConfigError);
  }
}

TEST_CASE("catmull-rom weights") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double t = d(rng);
    const auto w = catmull_rom_weights(t);
    CHECK(w[0] + w[1] + w[2] + w[3] == doctest::Approx(1.0).epsilon(1e-14));
    // Linear precision: sum w_k (k - 1) = t.
    CHECK(-w[0] + w[2] + 2 * w[3] == doctest::Approx(t).epsilon(1e-14));
  }
  const auto w0 = catmull_rom_weights(0.0);
  CHECK(w0[0] == 0.0);
  CHECK(w0[1] == 1.0);
  CHECK(w0[2] == 0.0);
  CHECK(w0[3] == 0.0);
}

TEST_CASE("reference_sample") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  SUBCASE("constant stack") {
    ImageF img(8, 16, 16);
    img.pixels.setConstant(0.6f);
    const MaterialStack s = build_mip_pyramid(img);
    for (int i = 0; i < 50; ++i) {
      const Eigen::VectorXd v = reference_sample(s, d(rng), d(rng), 2.0 * d(rng));
      CHECK((v.array() - 0.6).abs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("texel centres at integer s") {
    const MaterialStack s = build_mip_pyramid(random_image(8, 16, rng));
    for (int m = 0; m < s.mip_count(); ++m) {
      const ImageF& img = s.mips[std::size_t(m)];
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const Eigen::VectorXd v = reference_sample(s, (x + 0.5) / img.width, (y + 0.5) / img.height, m);
          CHECK((v - img.at(x, y).cast<double>()).norm() == 0.0);
        }
    }
  }
  SUBCASE("bilinear ramp is reproduced away from the border") {
    ImageF img(1, 32, 32);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) img.at(x, y)(0) = float(0.01 * x + 0.02 * y);
    MaterialStack s;
    s.mips.push_back(img);
    for (int i = 0; i < 200; ++i) {
      // Keep the 4x4 footprint inside the image.
      const double u = (2.0 + 27.0 * d(rng)) / 32.0, v = (2.0 + 27.0 * d(rng)) / 32.0;
      const double expected = 0.01 * (u * 32 - 0.5) + 0.02 * (v * 32 - 0.5);
      CHECK(reference_sample(s, u, v, 0.0)(0) == doctest::Approx(expected).epsilon(1e-6));
    }
  }
  SUBCASE("fractional s blends neighbouring mips") {
    const MaterialStack s = build_mip_pyramid(random_image(2, 32, rng));
    const double u = 0.3, v = 0.7;
    const Eigen::VectorXd a = sample_bicubic(s.mips[1], u, v), b = sample_bicubic(s.mips[2], u, v);
    CHECK((reference_sample(s, u, v, 1.25) - (0.75 * a + 0.25 * b)).norm() < 1e-12);
    CHECK(reference_sample(s, u, v, 99.0) == sample_bicubic(s.mips.back(), u, v));
  }
}
