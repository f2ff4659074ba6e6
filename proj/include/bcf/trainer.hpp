#pragma once

// Two-phase fitting of feature layers and decoder to a reference material.
//
// Phase 1 optimizes unconstrained texel grids; they are then compressed with
// encode_block and phase 2 optimizes the block parameters directly through the
// soft decode, with partitions held fixed. Over the trailing qat_fraction of
// phase 2 the forward pass sees the rounded (exported) blocks and the soft
// decode gradient at that point is applied to the continuous parameters.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bcf/decoder.hpp"
#include "bcf/feature_grid.hpp"
#include "bcf/material.hpp"
#include "bcf/train_config.hpp"

namespace bcf {

struct Model {
  std::vector<FeaturePyramid> layers;
  Decoder mlp;
  /// Base resolution of the reference material the model was fitted to.
  int base_size = 0;

  int input_width() const { return 3 * int(layers.size()); }
};

/// Phase-1 model: raw layers filled from [init_lo, init_hi], decoder randomly
/// initialized. Draws from `rng` in a fixed order.
Model make_model(const TrainConfig& config, int base_size, int output_channels, std::mt19937_64& rng);

/// Per-layer mip coordinate: s + log2(layer_size / base_size), clamped to
/// [0, mips - 1].
double layer_scale(double s, int layer_size, int base_size, int layer_mips);

struct Batch {
  Eigen::Matrix2Xd uv;
  double s = 0.0;
};

/// A grid x grid lattice of uv points, each jittered uniformly inside its
/// cell by up to `jitter` cell widths (0 gives cell centres), plus one s drawn
/// uniformly from [0, mip_count - 1].
Batch sample_batch(std::mt19937_64& rng, int grid, int mip_count, double jitter = 1.0);
/// Cell centres of a grid x grid lattice at a fixed s.
Batch grid_batch(int grid, double s);

/// Single-pixel forward: sample every layer trilinearly, concatenate, decode.
Eigen::VectorXd model_forward(const Model& model, double u, double v, double s);

/// Reference values of every batch point, channels x points.
Eigen::MatrixXd reference_batch(const MaterialStack& stack, const Batch& batch);

/// Model outputs of every batch point, channels x points.
Eigen::MatrixXd model_batch(const Model& model, const Batch& batch);

/// Mean over points of the squared error summed over channels.
double loss_batch(const Model& model, const MaterialStack& stack, const Batch& batch);

struct ModelGrad {
  std::vector<FeaturePyramid> layers;
  Decoder mlp;

  static ModelGrad zeros_like(const Model& model);
};

/// Loss and its exact gradient, accumulated into `grad`.
double backprop_batch(const Model& model, const MaterialStack& stack, const Batch& batch, ModelGrad& grad);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Eigen::VectorXd> first;
  std::vector<Eigen::VectorXd> second;
  long step = 0;
};

/// lr0 * gamma^t.
double scheduled_lr(double lr0, double gamma, long t);

/// One Adam update over matching parameter/gradient arrays. Moments are
/// allocated on first use.
void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, double lr, const AdamHyper& hyper);

// ---------------------------------------------------------------------------
// Orchestration

struct LogRow {
  long iteration = 0;  // counted across both phases
  int phase = 1;
  double loss = 0.0;
  /// -10 log10 of the per-channel mean squared error.
  double psnr = 0.0;
  double lr_features = 0.0;
  double lr_mlp = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<LogRow> log;
  /// Mean loss over grid batches at every integer s, measured on the same
  /// points at the end of phase 1 and right after block initialization.
  double phase1_final_loss = 0.0;
  double phase2_initial_loss = 0.0;
  double phase2_final_loss = 0.0;
  /// The same measure with every block rounded to its exported codes.
  double quantized_final_loss = 0.0;
  double phase1_seconds = 0.0;
  double phase2_seconds = 0.0;
};

/// Loss averaged over grid_batch(grid, m) for m = 0 .. S-1.
double eval_loss(const Model& model, const MaterialStack& stack, int grid);

/// Copy with every block layer passed through quantize_pyramid.
Model quantized_model(const Model& model);

/// Throws DivergenceError if the loss becomes non-finite. Deterministic for a
/// given config, independent of the worker count.
TrainResult train(const MaterialStack& stack, const TrainConfig& config,
                  const std::function<void(const LogRow&)>& on_log = {});

/// CSV with header iteration,phase,loss,psnr,lr_features,lr_mlp. Wall time is kept
/// out so logs of identical runs are byte-identical.
void write_log_csv(std::ostream& out, const std::vector<LogRow>& log);

}  // namespace bcf
