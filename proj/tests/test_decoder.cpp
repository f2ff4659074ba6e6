#include <cmath>
#include <random>

#include "bcf/decoder.hpp"
#include "bcf/error.hpp"
#include "doctest.h"

using namespace bcf;

namespace {

// Plain loops, no Eigen products.
Eigen::VectorXd naive_forward(const Decoder& m, const Eigen::VectorXd& x) {
  std::vector<double> h(std::size_t(m.hidden_width()));
  for (int r = 0; r < m.hidden_width(); ++r) {
    double acc = m.b1(r);
    for (int c = 0; c < m.input_width(); ++c) acc += m.W1(r, c) * std::max(x(c), 0.0);
    h[std::size_t(r)] = std::max(acc, 0.0);
  }
  Eigen::VectorXd y(m.output_width());
  for (int r = 0; r < m.output_width(); ++r) {
    double acc = m.b2(r);
    for (int c = 0; c < m.hidden_width(); ++c) acc += m.W2(r, c) * h[std::size_t(c)];
    y(r) = acc;
  }
  return y;
}

Eigen::VectorXd random_vector(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

}  // namespace

TEST_CASE("forward") {
  std::mt19937_64 rng(1);
  SUBCASE("zero network") {
    const Decoder m(12, 16, 8);
    CHECK(forward(m, random_vector(12, rng)).isZero(0.0));
  }
  SUBCASE("identity slices pass nonnegative input through") {
    Decoder m(12, 16, 8);
    m.W1.topLeftCorner(12, 12).setIdentity();
    m.W2.topLeftCorner(8, 8).setIdentity();
    const Eigen::VectorXd x = random_vector(12, rng).cwiseAbs();
    CHECK(forward(m, x) == x.head(8));
  }
  SUBCASE("matches a scalar oracle") {
    for (int hidden : {16, 32}) {
      const Decoder m = Decoder::random(12, hidden, 8, rng);
      for (int t = 0; t < 100; ++t) {
        const Eigen::VectorXd x = 3.0 * random_vector(12, rng);
        CHECK((forward(m, x) - naive_forward(m, x)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
  SUBCASE("batched forward equals per-column forward") {
    const Decoder m = Decoder::random(12, 16, 8, rng);
    Eigen::MatrixXd x(12, 37);
    for (int c = 0; c < 37; ++c) x.col(c) = random_vector(12, rng);
    ForwardBatch<double> fwd;
    forward_batch(m, x, fwd);
    for (int c = 0; c < 37; ++c) CHECK((fwd.output.col(c) - forward(m, x.col(c))).norm() < 1e-14);
  }
  SUBCASE("positive homogeneity with zero biases") {
    Decoder m = Decoder::random(12, 16, 8, rng);
    m.b1.setZero();
    m.b2.setZero();
    const Eigen::VectorXd x = random_vector(12, rng);
    for (double c : {0.25, 2.0, 8.0}) CHECK(forward(m, Eigen::VectorXd(c * x)) == c * forward(m, x));
  }
}

TEST_CASE("backward") {
  std::mt19937_64 rng(2);
  SUBCASE("zero upstream gives zero gradients") {
    const Decoder m = Decoder::random(12, 16, 8, rng);
    Decoder g = m.zeros_like();
    const Eigen::VectorXd dx = backward(m, random_vector(12, rng), Eigen::VectorXd::Zero(8), g);
    CHECK(dx.isZero(0.0));
    CHECK(g == m.zeros_like());
  }
  SUBCASE("single unit by hand") {
    // y = w2 relu(w1 relu(x) + b1) + b2 with x = 2, w1 = 3, b1 = -1, w2 = 0.5, b2 = 4.
    Decoder m(1, 1, 1);
    m.W1(0, 0) = 3;
    m.b1(0) = -1;
    m.W2(0, 0) = 0.5;
    m.b2(0) = 4;
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0);
    CHECK(forward(m, x)(0) == 6.5);
    Decoder g = m.zeros_like();
    // L = y, so dL/dy = 1. Hidden pre-activation 5 > 0.
    const Eigen::VectorXd dx = backward(m, x, Eigen::VectorXd::Constant(1, 1.0), g);
    CHECK(g.b2(0) == 1.0);
    CHECK(g.W2(0, 0) == 5.0);
    CHECK(g.b1(0) == 0.5);
    CHECK(g.W1(0, 0) == 1.0);
    CHECK(dx(0) == 1.5);
    // Negative input is cut by the input rectifier.
    Decoder g2 = m.zeros_like();
    const Eigen::VectorXd dx2 = backward(m, Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 1.0), g2);
    CHECK(dx2(0) == 0.0);
    CHECK(g2.W1(0, 0) == 0.0);
    CHECK(g2.W2(0, 0) == 0.0);  // hidden = relu(-1) = 0
  }
  SUBCASE("finite differences") {
    const double h = 1e-6;
    int worst_count = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Decoder m = Decoder::random(12, 16, 8, rng);
      Eigen::VectorXd x = 2.0 * random_vector(12, rng);
      const Eigen::VectorXd w = random_vector(8, rng);
      const auto loss = [&](const Decoder& mm, const Eigen::VectorXd& xx) { return w.dot(forward(mm, xx)); };
      Decoder g = m.zeros_like();
      const Eigen::VectorXd dx = backward(m, x, w, g);
      const auto check = [&](double fd, double an) {
        const bool ok = std::abs(fd - an) <= 1e-5 * std::max(std::abs(fd), std::abs(an)) + 1e-9;
        worst_count += !ok;
        CHECK(ok);
      };
      auto params = m.parameters();
      auto grads = g.parameters();
      for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t i = 0; i < params[t].size(); ++i) {
          const double orig = params[t][i];
          params[t][i] = orig + h;
          const double lp = loss(m, x);
          params[t][i] = orig - h;
          const double lm = loss(m, x);
          params[t][i] = orig;
          check((lp - lm) / (2 * h), grads[t][i]);
        }
      for (int i = 0; i < 12; ++i) {
        if (std::abs(x(i)) < 10 * h) continue;
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        check((loss(m, xp) - loss(m, xm)) / (2 * h), dx(i));
      }
    }
    CHECK(worst_count == 0);
  }
  SUBCASE("batched backward sums per-sample gradients") {
    const Decoder m = Decoder::random(12, 32, 8, rng);
    Eigen::MatrixXd x(12, 20), dy(8, 20);
    for (int c = 0; c < 20; ++c) {
      x.col(c) = random_vector(12, rng);
      dy.col(c) = random_vector(8, rng);
    }
    ForwardBatch<double> fwd;
    forward_batch(m, x, fwd);
    Decoder gb = m.zeros_like();
    Eigen::MatrixXd dx;
    backward_batch(m, fwd, dy, gb, dx);
    Decoder gs = m.zeros_like();
    for (int c = 0; c < 20; ++c) {
      const Eigen::VectorXd d = backward(m, Eigen::VectorXd(x.col(c)), Eigen::VectorXd(dy.col(c)), gs);
      CHECK((d - dx.col(c)).norm() < 1e-13);
    }
    CHECK((gb.W1 - gs.W1).norm() < 1e-12);
    CHECK((gb.W2 - gs.W2).norm() < 1e-12);
    CHECK((gb.b1 - gs.b1).norm() < 1e-12);
    CHECK((gb.b2 - gs.b2).norm() < 1e-12);
  }
}

TEST_CASE("fp16 weight blob") {
  std::mt19937_64 rng(3);
  SUBCASE("zero network") {
    const std::vector<std::uint8_t> blob = export_weights(Decoder(12, 16, 8));
    REQUIRE(blob.size() == 16 + 2 * (16 * 12 + 16 + 8 * 16 + 8));
    CHECK(std::string(blob.begin(), blob.begin() + 4) == "BCFW");
    CHECK(blob[4] == 1);
    CHECK(blob[8] == 16);
    CHECK(blob[12] == 8);
    CHECK(std::all_of(blob.begin() + 16, blob.end(), [](std::uint8_t b) { return b == 0; }));
  }
  SUBCASE("1.0 encodes as 00 3C, row-major") {
    Decoder m(12, 16, 8);
    m.W1(0, 1) = 1.0;
    const std::vector<std::uint8_t> blob = export_weights(m);
    CHECK(blob[16 + 2] == 0x00);
    CHECK(blob[16 + 3] == 0x3C);
  }
  SUBCASE("round trip") {
    const Decoder m = Decoder::random(12, 32, 8, rng);
    const std::vector<std::uint8_t> blob = export_weights(m);
    const Decoder back = import_weights(blob);
    CHECK(export_weights(back) == blob);
    CHECK(import_weights(export_weights(back)) == back);
    Decoder copy = m;
    auto a = copy.parameters();
    auto b = const_cast<Decoder&>(back).parameters();
    for (std::size_t t = 0; t < a.size(); ++t)
      for (std::size_t i = 0; i < a[t].size(); ++i) {
        // Half ulp at |w| in [2^e, 2^(e+1)) is 2^(e-10).
        const double w = a[t][i];
        const double ulp = std::ldexp(1.0, std::max(std::ilogb(w), -14) - 10);
        CHECK(std::abs(b[t][i] - w) <= ulp);
      }
  }
  SUBCASE("errors") {
    Decoder m(12, 16, 8);
    m.b2(3) = std::nan("");
    CHECK_THROWS_AS(export_weights(m), ExportError);
    m.b2(3) = 1e6;
    CHECK_THROWS_AS(export_weights(m), ExportError);
    CHECK_THROWS_AS(export_weights(Decoder(9, 16, 8)), ExportError);

    std::vector<std::uint8_t> blob = export_weights(Decoder(12, 16, 8));
    std::vector<std::uint8_t> truncated(blob.begin(), blob.end() - 1);
    CHECK_THROWS_AS(import_weights(truncated), FormatError);
    blob[0] = 'X';
    CHECK_THROWS_AS(import_weights(blob), FormatError);
  }
}
