#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "bcf/assets.hpp"
#include "bcf/error.hpp"
#include "bcf/gradcheck.hpp"
#include "bcf/parallel.hpp"
#include "bcf/trainer.hpp"
#include "doctest.h"

using namespace bcf;

namespace {

MaterialStack random_stack(int channels, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  ImageF img(channels, size, size);
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) img.pixels.data()[i] = d(rng);
  return build_mip_pyramid(img);
}

// Smooth 8-channel pattern: learnable, not degenerate.
MaterialStack smooth_stack(int size) {
  ImageF img(8, size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 8; ++c)
        img.at(x, y)(c) = float(0.5 + 0.4 * std::sin(0.3 * (c + 1) * x / size * 6.28 + c) * std::cos(0.2 * y / size * 6.28 * (8 - c)));
  return build_mip_pyramid(img);
}

MaterialStack constant_stack(int channels, int size, float value) {
  ImageF img(channels, size, size);
  img.pixels.setConstant(value);
  return build_mip_pyramid(img);
}

// One 8x8 layer, hidden width 4, 2-channel material.
TrainConfig toy_config() {
  TrainConfig c;
  c.preset = "toy";
  c.layers = {{8, 2}};
  c.hidden_width = 4;
  c.batch_grid = 4;
  return c;
}

Model toy_model(std::uint64_t seed, bool blocks) {
  std::mt19937_64 rng(seed);
  Model m = make_model(toy_config(), 8, 2, rng);
  // Spread the decoder so most hidden units are active.
  m.mlp = Decoder::random(3, 4, 2, rng);
  m.mlp.b1.setConstant(0.5);
  if (blocks)
    for (FeaturePyramid& l : m.layers) l = init_from_raw(l);
  return m;
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.preset = "small";
  c.layers = {{16, 3}, {8, 2}};
  c.hidden_width = 8;
  c.batch_grid = 16;
  c.phase1_iters = 60;
  c.phase2_iters = 60;
  c.log_every = 10;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("sample_batch") {
  std::mt19937_64 rng(1);
  SUBCASE("no jitter gives cell centres") {
    const Batch b = sample_batch(rng, 8, 5, 0.0);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        CHECK(b.uv(0, y * 8 + x) == (x + 0.5) / 8);
        CHECK(b.uv(1, y * 8 + x) == (y + 0.5) / 8);
      }
    CHECK(b.s >= 0.0);
    CHECK(b.s <= 4.0);
  }
  SUBCASE("jittered points stay inside their cells") {
    for (int t = 0; t < 20; ++t) {
      const Batch b = sample_batch(rng, 16, 7);
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          CHECK(b.uv(0, y * 16 + x) >= x / 16.0);
          CHECK(b.uv(0, y * 16 + x) <= (x + 1) / 16.0);
          CHECK(b.uv(1, y * 16 + x) >= y / 16.0);
          CHECK(b.uv(1, y * 16 + x) <= (y + 1) / 16.0);
        }
    }
  }
  SUBCASE("mean scale is (S-1)/2") {
    const int mips = 7;
    double sum = 0.0;
    const int n = 100000;
    for (int t = 0; t < n; ++t) sum += sample_batch(rng, 1, mips).s;
    CHECK(std::abs(sum / n - 3.0) < 0.03);
  }
  SUBCASE("grid_batch") {
    const Batch b = grid_batch(4, 2.5);
    CHECK(b.s == 2.5);
    CHECK(b.uv(0, 5) == 0.375);
    CHECK(b.uv(1, 5) == 0.375);
  }
}

TEST_CASE("layer_scale") {
  CHECK(layer_scale(0.0, 256, 256, 7) == 0.0);
  CHECK(layer_scale(2.5, 128, 256, 6) == 1.5);
  CHECK(layer_scale(1.0, 64, 256, 5) == 0.0);
  CHECK(layer_scale(6.0, 512, 256, 8) == 7.0);
  CHECK(layer_scale(6.0, 256, 256, 3) == 2.0);
}

TEST_CASE("model_forward") {
  std::mt19937_64 rng(3);
  TrainConfig c = TrainConfig::from_preset("desk");
  Model m = make_model(c, 256, 8, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SUBCASE("zero decoder gives zero output") {
    m.mlp = m.mlp.zeros_like();
    for (int t = 0; t < 10; ++t) CHECK(model_forward(m, unit(rng), unit(rng), 6.0 * unit(rng)).isZero(0.0));
  }
  SUBCASE("identity slice returns the trilinear sample") {
    TrainConfig one = toy_config();
    one.layers = {{16, 3}};
    Model single = make_model(one, 16, 3, rng);
    single.mlp = Decoder(3, 3, 3);
    single.mlp.W1.setIdentity();
    single.mlp.W2.setIdentity();
    for (int t = 0; t < 20; ++t) {
      const double u = unit(rng), v = unit(rng), s = 2.0 * unit(rng);
      CHECK((model_forward(single, u, v, s) - sample_trilinear(single.layers[0], u, v, s)).norm() < 1e-15);
    }
  }
  SUBCASE("composition oracle") {
    for (FeaturePyramid& l : m.layers) l = init_from_raw(l);
    for (int t = 0; t < 20; ++t) {
      const double u = unit(rng), v = unit(rng), s = 6.0 * unit(rng);
      Eigen::VectorXd x(12);
      for (int l = 0; l < 4; ++l) {
        const FeaturePyramid& p = m.layers[std::size_t(l)];
        const double sl = std::clamp(s + std::log2(p.size() / 256.0), 0.0, p.mip_count() - 1.0);
        x.segment<3>(3 * l) = sample_trilinear(p, u, v, sl);
      }
      CHECK(model_forward(m, u, v, s) == forward(m.mlp, x));
    }
  }
  SUBCASE("batched evaluation matches per point") {
    const Batch b = sample_batch(rng, 40, 7);
    const Eigen::MatrixXd out = model_batch(m, b);
    for (Eigen::Index i = 0; i < b.uv.cols(); i += 37)
      CHECK((out.col(i) - model_forward(m, b.uv(0, i), b.uv(1, i), b.s)).norm() < 1e-12);
  }
}

TEST_CASE("loss_batch") {
  std::mt19937_64 rng(4);
  TrainConfig c = small_config(1);
  Model m = make_model(c, 16, 8, rng);
  m.mlp = m.mlp.zeros_like();
  const Batch b = sample_batch(rng, 8, 3);
  CHECK(loss_batch(m, constant_stack(8, 16, 0.0f), b) == 0.0);
  CHECK(loss_batch(m, constant_stack(8, 16, 0.125f), b) == doctest::Approx(8 * 0.125 * 0.125).epsilon(1e-12));
  m.mlp.b2.setConstant(0.25);
  CHECK(loss_batch(m, constant_stack(8, 16, 0.375f), b) == doctest::Approx(8 * 0.125 * 0.125).epsilon(1e-12));
  const Model r = make_model(c, 16, 8, rng);
  CHECK(loss_batch(r, random_stack(8, 16, 9), b) >= 0.0);
}

TEST_CASE("backprop_batch") {
  SUBCASE("zero loss gives zero gradient") {
    std::mt19937_64 rng(5);
    Model m = make_model(small_config(1), 16, 8, rng);
    m.mlp = Decoder::random(6, 8, 8, rng);
    m.mlp.W2.setZero();
    m.mlp.b2.setZero();
    for (FeaturePyramid& l : m.layers) l = init_from_raw(l);
    ModelGrad g = ModelGrad::zeros_like(m);
    CHECK(backprop_batch(m, constant_stack(8, 16, 0.0f), sample_batch(rng, 8, 3), g) == 0.0);
    for (const FeaturePyramid& l : g.layers)
      for (const auto& span : l.parameters())
        for (double v : span) CHECK(v == 0.0);
    for (const auto& span : g.mlp.parameters())
      for (double v : span) CHECK(v == 0.0);
  }
  SUBCASE("toy configuration matches finite differences") {
    const MaterialStack stack = random_stack(2, 8, 11);
    for (bool blocks : {false, true})
      for (std::uint64_t seed : {1, 2, 3}) {
        CAPTURE(blocks);
        CAPTURE(seed);
        const Model m = toy_model(seed, blocks);
        std::mt19937_64 rng(seed);
        Batch single = sample_batch(rng, 1, 2);
        const GradCheckResult one = check_gradients(m, stack, single, 1 << 20, seed);
        CHECK(one.passed + one.kinks == one.checked);
        const GradCheckResult many = check_gradients(m, stack, sample_batch(rng, 6, 2), 1 << 20, seed);
        CHECK(many.passed + many.kinks == many.checked);
        CHECK(many.kinks <= many.checked / 100);
      }
  }
  SUBCASE("blocks outside the footprint get no gradient") {
    std::mt19937_64 rng(6);
    const Model m = toy_model(6, true);
    Batch b;
    b.s = 0.0;
    b.uv = Eigen::Matrix2Xd(2, 1);
    b.uv << 0.1, 0.1;  // texel (0,0) of the 8x8 mip: block 0 only
    ModelGrad g = ModelGrad::zeros_like(m);
    backprop_batch(m, random_stack(2, 8, 12), b, g);
    const BlockGrid& mip0 = g.layers[0].blocks()[0];
    CHECK(mip0.block(0).endpoints.norm() + mip0.block(0).alpha.norm() > 0.0);
    for (int k = 1; k < mip0.block_count(); ++k) {
      CHECK(mip0.block(k).endpoints.isZero(0.0));
      CHECK(mip0.block(k).alpha.isZero(0.0));
    }
    const BlockGrid& mip1 = g.layers[0].blocks()[1];
    CHECK(mip1.block(0).endpoints.isZero(0.0));
  }
}

TEST_CASE("adam") {
  SUBCASE("schedule") {
    CHECK(scheduled_lr(5e-2, 0.9995, 0) == 5e-2);
    // 5e-2 * 0.9995^5000 = 4.1017e-3, quoted as ~4.105e-3.
    CHECK(scheduled_lr(5e-2, 0.9995, 5000) == doctest::Approx(4.105e-3).epsilon(1e-3));
    CHECK(scheduled_lr(5e-2, 0.9995, 5000) == doctest::Approx(5e-2 * std::exp(5000 * std::log(0.9995))).epsilon(1e-12));
    CHECK(scheduled_lr(1e-2, 0.99999, 100) == doctest::Approx(1e-2 * std::pow(0.99999, 100)));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> p{0.5, -1.0, 2.0}, g(3, 0.0);
    const std::vector<double> before = p;
    AdamState state;
    for (int t = 0; t < 5; ++t) adam_step(state, {std::span<double>(p)}, {std::span<const double>(g)}, 0.1, {});
    CHECK(p == before);
  }
  SUBCASE("two steps against a hand computation") {
    std::vector<double> p{1.0}, g{0.5};
    AdamState state;
    const AdamHyper h;
    adam_step(state, {std::span<double>(p)}, {std::span<const double>(g)}, 0.01, h);
    // Step 1: m = 0.05, v = 2.5e-4; bias-corrected m/sqrt(v) = 1.
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
    g[0] = -1.0;
    const double m2 = 0.9 * 0.05 + 0.1 * -1.0, v2 = 0.999 * 2.5e-4 + 0.001 * 1.0;
    const double mhat = m2 / (1 - 0.81), vhat = v2 / (1 - 0.999 * 0.999);
    const double expected = p[0] - 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    adam_step(state, {std::span<double>(p)}, {std::span<const double>(g)}, 0.01, h);
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("train") {
  SUBCASE("constant material is learned") {
    TrainConfig c;
    c.layers = {{4, 1}};
    c.hidden_width = 4;
    c.batch_grid = 4;
    c.phase1_iters = 100;
    c.phase2_iters = 100;
    c.lr_mlp = 3e-2;  // the default 1e-3 needs ~1000 steps just to move the output biases
    const TrainResult r = train(constant_stack(8, 4, 0.6f), c);
    CHECK(r.phase2_final_loss < 1e-4);
    CHECK(r.quantized_final_loss < 1e-4);
  }
  SUBCASE("identical seeds give identical logs at any thread count") {
    const MaterialStack stack = smooth_stack(32);
    set_thread_count(1);
    const TrainResult a = train(stack, small_config(7));
    set_thread_count(3);
    const TrainResult b = train(stack, small_config(7));
    set_thread_count(0);
    std::ostringstream la, lb;
    write_log_csv(la, a.log);
    write_log_csv(lb, b.log);
    CHECK(la.str() == lb.str());
    CHECK(a.model.mlp == b.model.mlp);
    for (std::size_t l = 0; l < a.model.layers.size(); ++l)
      CHECK(a.model.layers[l].blocks() == b.model.layers[l].blocks());
    CHECK(la.str().rfind("iteration,phase,loss,psnr,lr_features,lr_mlp\n", 0) == 0);
  }
  SUBCASE("loss falls between iterations 10 and 1000") {
    const MaterialStack stack = smooth_stack(32);
    std::vector<double> early, late;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      TrainConfig c = small_config(seed);
      c.phase1_iters = 1001;
      c.phase2_iters = 0;
      const TrainResult r = train(stack, c);
      for (const LogRow& row : r.log) {
        if (row.iteration == 10) early.push_back(row.loss);
        if (row.iteration == 1000) late.push_back(row.loss);
      }
    }
    REQUIRE(early.size() == 5);
    REQUIRE(late.size() == 5);
    std::sort(early.begin(), early.end());
    std::sort(late.begin(), late.end());
    CHECK(late[2] < early[2]);
  }
  SUBCASE("blocks stay feasible") {
    const TrainResult r = train(smooth_stack(32), small_config(3));
    for (const FeaturePyramid& l : r.model.layers) {
      REQUIRE(l.storage() == FeaturePyramid::Storage::Block);
      for (const BlockGrid& g : l.blocks()) {
        CHECK(g.alpha.minCoeff() >= 0.0);
        CHECK(g.alpha.maxCoeff() <= 1.0);
        CHECK(g.endpoints.minCoeff() >= 0.0);
        CHECK(g.endpoints.maxCoeff() <= 63.0);
      }
    }
  }
  SUBCASE("log layout") {
    TrainConfig c = small_config(2);
    c.phase1_iters = 25;
    c.phase2_iters = 15;
    const TrainResult r = train(smooth_stack(32), c);
    std::vector<long> iters;
    for (const LogRow& row : r.log) iters.push_back(row.iteration);
    CHECK(iters == std::vector<long>{0, 10, 20, 24, 25, 35, 39});
    CHECK(r.log.back().phase == 2);
    CHECK(std::isfinite(r.phase2_initial_loss));
  }
  SUBCASE("non-finite losses abort") {
    TrainConfig c = small_config(1);
    c.lr_mlp = 1e300;
    c.lr_features_p1 = 1e300;
    CHECK_THROWS_AS(train(smooth_stack(32), c), DivergenceError);
  }
}

TEST_CASE("phase-2 start stays within 3x of the phase-1 result on the desk fixture") {
  const std::filesystem::path dir = std::filesystem::path(BCF_TEST_DATA) / "desk";
  const MaterialStack stack = load_material(dir / "albedo.png", dir / "normal.png", dir / "arm.png");
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig c = TrainConfig::from_preset("desk");
    c.seed = seed;
    c.phase2_iters = 0;
    const TrainResult r = train(stack, c);
    REQUIRE(std::isfinite(r.phase2_initial_loss));
    ratios.push_back(r.phase2_initial_loss / r.phase1_final_loss);
  }
  std::sort(ratios.begin(), ratios.end());
  CAPTURE(ratios);
  CHECK(ratios[2] <= 3.0);
}
