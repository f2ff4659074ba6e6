#pragma once

// The per-pixel decoder network: y = W2 relu(W1 relu(x) + b1) + b2.
// Input width is 3 per feature layer (12 for four layers).

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace bcf {

template <typename Scalar>
struct DecoderMLP {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix W1;  // hidden x input
  Vector b1;
  Matrix W2;  // output x hidden
  Vector b2;

  DecoderMLP() = default;
  DecoderMLP(int input, int hidden, int output)
      : W1(Matrix::Zero(hidden, input)), b1(Vector::Zero(hidden)), W2(Matrix::Zero(output, hidden)),
        b2(Vector::Zero(output)) {}

  int input_width() const { return int(W1.cols()); }
  int hidden_width() const { return int(W1.rows()); }
  int output_width() const { return int(W2.rows()); }

  /// Uniform in +-sqrt(1/fan_in) for weights and biases of each layer.
  static DecoderMLP random(int input, int hidden, int output, std::mt19937_64& rng) {
    DecoderMLP m(input, hidden, output);
    const auto fill = [&rng](auto& x, double bound) {
      std::uniform_real_distribution<double> d(-bound, bound);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = Scalar(d(rng));
    };
    fill(m.W1, std::sqrt(1.0 / input));
    fill(m.b1, std::sqrt(1.0 / input));
    fill(m.W2, std::sqrt(1.0 / hidden));
    fill(m.b2, std::sqrt(1.0 / hidden));
    return m;
  }

  DecoderMLP zeros_like() const { return DecoderMLP(input_width(), hidden_width(), output_width()); }

  template <typename Other>
  DecoderMLP<Other> cast() const {
    DecoderMLP<Other> m;
    m.W1 = W1.template cast<Other>();
    m.b1 = b1.template cast<Other>();
    m.W2 = W2.template cast<Other>();
    m.b2 = b2.template cast<Other>();
    return m;
  }

  /// W1, b1, W2, b2 storage, in that order.
  std::vector<std::span<Scalar>> parameters() {
    return {{W1.data(), std::size_t(W1.size())},
            {b1.data(), std::size_t(b1.size())},
            {W2.data(), std::size_t(W2.size())},
            {b2.data(), std::size_t(b2.size())}};
  }
  std::size_t parameter_count() const { return std::size_t(W1.size() + b1.size() + W2.size() + b2.size()); }

  bool operator==(const DecoderMLP& o) const {
    return W1 == o.W1 && b1 == o.b1 && W2 == o.W2 && b2 == o.b2;
  }
};

using Decoder = DecoderMLP<double>;

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const DecoderMLP<Scalar>& mlp, const Eigen::MatrixBase<Derived>& x) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hidden =
      (mlp.W1 * x.cwiseMax(Scalar(0)) + mlp.b1).cwiseMax(Scalar(0));
  return mlp.W2 * hidden + mlp.b2;
}

/// Column-wise forward over a batch; keeps what backward needs.
template <typename Scalar>
struct ForwardBatch {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> input;   // relu(x)
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> hidden;  // relu(W1 relu(x) + b1)
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> output;
};

template <typename Scalar, typename Derived>
void forward_batch(const DecoderMLP<Scalar>& mlp, const Eigen::MatrixBase<Derived>& x, ForwardBatch<Scalar>& out) {
  out.input = x.cwiseMax(Scalar(0));
  out.hidden.noalias() = mlp.W1 * out.input;
  out.hidden = (out.hidden.colwise() + mlp.b1).cwiseMax(Scalar(0));
  out.output.noalias() = mlp.W2 * out.hidden;
  out.output.colwise() += mlp.b2;
}

/// Accumulates parameter gradients into `grad` and writes dL/dx for every
/// column. Rectifier derivative is 0 at and below zero.
template <typename Scalar, typename Derived>
void backward_batch(const DecoderMLP<Scalar>& mlp, const ForwardBatch<Scalar>& fwd,
                    const Eigen::MatrixBase<Derived>& dy, DecoderMLP<Scalar>& grad,
                    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& dx) {
  grad.W2.noalias() += dy * fwd.hidden.transpose();
  grad.b2 += dy.rowwise().sum();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dh = mlp.W2.transpose() * dy;
  dh = (fwd.hidden.array() > Scalar(0)).select(dh, Scalar(0));
  grad.W1.noalias() += dh * fwd.input.transpose();
  grad.b1 += dh.rowwise().sum();
  dx.noalias() = mlp.W1.transpose() * dh;
  dx = (fwd.input.array() > Scalar(0)).select(dx, Scalar(0));
}

/// Single-sample backward: returns dL/dx and accumulates into grad.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> backward(const DecoderMLP<Scalar>& mlp,
                                                  const typename DecoderMLP<Scalar>::Vector& x,
                                                  const typename DecoderMLP<Scalar>::Vector& dy,
                                                  DecoderMLP<Scalar>& grad) {
  ForwardBatch<Scalar> fwd;
  forward_batch(mlp, x, fwd);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dx;
  backward_batch(mlp, fwd, dy, grad, dx);
  return dx.col(0);
}

// ---------------------------------------------------------------------------
// fp16 weight blob
//
//   offset 0   "BCFW"
//          4   u32 version (1)
//          8   u32 hidden width
//         12   u32 output width
//         16   W1 (hidden x 12, row-major), b1, W2 (output x hidden, row-major), b2
//              as little-endian binary16
// The input width is fixed at 12.

inline constexpr std::uint32_t kWeightBlobVersion = 1;
inline constexpr int kWeightBlobInputWidth = 12;

/// Throws ExportError for non-finite weights, values beyond the half range,
/// or an input width other than 12.
std::vector<std::uint8_t> export_weights(const Decoder& mlp);
/// Throws FormatError on malformed blobs.
Decoder import_weights(std::span<const std::uint8_t> blob);

}  // namespace bcf
