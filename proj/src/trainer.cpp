#include "bcf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "bcf/error.hpp"
#include "bcf/parallel.hpp"

namespace bcf {

namespace {

// Points per work item. Fixed so that partial sums, and therefore results,
// do not depend on how many threads run.
constexpr Eigen::Index kChunk = 2048;

std::vector<double> layer_scales(const Model& model, double s) {
  std::vector<double> out;
  for (const FeaturePyramid& l : model.layers) out.push_back(layer_scale(s, l.size(), model.base_size, l.mip_count()));
  return out;
}

std::vector<DecodedPyramid> decode_all(const Model& model) {
  std::vector<DecodedPyramid> out(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) decode_pyramid(model.layers[i], out[i]);
  return out;
}

void gather_features(const std::vector<DecodedPyramid>& decoded, const std::vector<double>& scales, double u, double v,
                     Eigen::Ref<Eigen::VectorXd> x) {
  for (std::size_t l = 0; l < decoded.size(); ++l)
    x.segment<3>(Eigen::Index(3 * l)) = apply_taps(decoded[l], trilinear_taps(decoded[l].sizes, u, v, scales[l]));
}

struct ChunkResult {
  double loss = 0.0;
  Decoder grad;
};

// Forward (and optionally backward through the decoder) over all points.
// dx receives dL/dfeatures per point when grad is requested.
double run_batch(const Model& model, const std::vector<DecodedPyramid>& decoded, const MaterialStack* stack,
                 const Batch& batch, Decoder* mlp_grad, Eigen::MatrixXd* dx, Eigen::MatrixXd* outputs) {
  const Eigen::Index n = batch.uv.cols();
  const std::vector<double> scales = layer_scales(model, batch.s);
  const Eigen::Index chunks = (n + kChunk - 1) / kChunk;
  std::vector<ChunkResult> results(static_cast<std::size_t>(chunks));
  if (dx) dx->resize(model.input_width(), n);
  if (outputs) outputs->resize(model.mlp.output_width(), n);

  parallel_for(std::size_t(chunks), [&](std::size_t c) {
    const Eigen::Index begin = Eigen::Index(c) * kChunk;
    const Eigen::Index count = std::min(kChunk, n - begin);
    Eigen::MatrixXd x(model.input_width(), count);
    for (Eigen::Index p = 0; p < count; ++p)
      gather_features(decoded, scales, batch.uv(0, begin + p), batch.uv(1, begin + p), x.col(p));
    ForwardBatch<double> fwd;
    forward_batch(model.mlp, x, fwd);
    if (outputs) outputs->middleCols(begin, count) = fwd.output;
    if (!stack) return;

    Eigen::MatrixXd residual = fwd.output;
    for (Eigen::Index p = 0; p < count; ++p)
      residual.col(p) -= reference_sample(*stack, batch.uv(0, begin + p), batch.uv(1, begin + p), batch.s);
    ChunkResult& r = results[c];
    r.loss = residual.squaredNorm();
    if (!mlp_grad) return;
    r.grad = model.mlp.zeros_like();
    const Eigen::MatrixXd dy = residual * (2.0 / double(n));
    Eigen::MatrixXd dxc;
    backward_batch(model.mlp, fwd, dy, r.grad, dxc);
    dx->middleCols(begin, count) = dxc;
  });

  double loss = 0.0;
  for (ChunkResult& r : results) {
    loss += r.loss;
    if (mlp_grad) {
      mlp_grad->W1 += r.grad.W1;
      mlp_grad->b1 += r.grad.b1;
      mlp_grad->W2 += r.grad.W2;
      mlp_grad->b2 += r.grad.b2;
    }
  }
  return loss / double(n);
}

std::vector<std::span<double>> feature_params(std::vector<FeaturePyramid>& layers) {
  std::vector<std::span<double>> out;
  for (FeaturePyramid& l : layers)
    for (const auto& s : l.parameters()) out.push_back(s);
  return out;
}

std::vector<std::span<const double>> const_view(const std::vector<std::span<double>>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

Model make_model(const TrainConfig& config, int base_size, int output_channels, std::mt19937_64& rng) {
  config.validate();
  Model m;
  m.base_size = base_size;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    m.layers.emplace_back(int(i), config.layers[i].size, config.layers[i].mips, FeaturePyramid::Storage::Raw,
                          config.mode);
    m.layers.back().randomize(rng, config.init_lo, config.init_hi);
  }
  m.mlp = Decoder::random(3 * int(config.layers.size()), config.hidden_width, output_channels, rng);
  return m;
}

double layer_scale(double s, int layer_size, int base_size, int layer_mips) {
  return std::clamp(s + std::log2(double(layer_size) / double(base_size)), 0.0, double(layer_mips - 1));
}

Batch sample_batch(std::mt19937_64& rng, int grid, int mip_count, double jitter) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Batch b;
  b.s = unit(rng) * double(mip_count - 1);
  b.uv.resize(2, Eigen::Index(grid) * grid);
  for (int y = 0; y < grid; ++y)
    for (int x = 0; x < grid; ++x) {
      const Eigen::Index i = Eigen::Index(y) * grid + x;
      double ju = 0.0, jv = 0.0;
      if (jitter > 0.0) {
        ju = jitter * (unit(rng) - 0.5);
        jv = jitter * (unit(rng) - 0.5);
      }
      b.uv(0, i) = (x + 0.5 + ju) / grid;
      b.uv(1, i) = (y + 0.5 + jv) / grid;
    }
  return b;
}

Batch grid_batch(int grid, double s) {
  std::mt19937_64 unused;
  Batch b = sample_batch(unused, grid, 1, 0.0);
  b.s = s;
  return b;
}

Eigen::VectorXd model_forward(const Model& model, double u, double v, double s) {
  Eigen::VectorXd x(model.input_width());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const FeaturePyramid& p = model.layers[l];
    x.segment<3>(Eigen::Index(3 * l)) =
        sample_trilinear(p, u, v, layer_scale(s, p.size(), model.base_size, p.mip_count()));
  }
  return forward(model.mlp, x);
}

Eigen::MatrixXd reference_batch(const MaterialStack& stack, const Batch& batch) {
  Eigen::MatrixXd out(stack.channels(), batch.uv.cols());
  parallel_for(std::size_t(batch.uv.cols()), [&](std::size_t p) {
    const Eigen::Index i = Eigen::Index(p);
    out.col(i) = reference_sample(stack, batch.uv(0, i), batch.uv(1, i), batch.s);
  });
  return out;
}

Eigen::MatrixXd model_batch(const Model& model, const Batch& batch) {
  Eigen::MatrixXd out;
  run_batch(model, decode_all(model), nullptr, batch, nullptr, nullptr, &out);
  return out;
}

double loss_batch(const Model& model, const MaterialStack& stack, const Batch& batch) {
  return run_batch(model, decode_all(model), &stack, batch, nullptr, nullptr, nullptr);
}

ModelGrad ModelGrad::zeros_like(const Model& model) {
  ModelGrad g;
  for (const FeaturePyramid& l : model.layers) g.layers.push_back(l.zeros_like());
  g.mlp = model.mlp.zeros_like();
  return g;
}

double backprop_batch(const Model& model, const MaterialStack& stack, const Batch& batch, ModelGrad& grad) {
  const std::vector<DecodedPyramid> decoded = decode_all(model);
  Eigen::MatrixXd dx;
  const double loss = run_batch(model, decoded, &stack, batch, &grad.mlp, &dx, nullptr);

  // Scatter feature gradients to decoded texels: one layer per work item,
  // points in order, so the accumulation order is fixed.
  const std::vector<double> scales = layer_scales(model, batch.s);
  std::vector<DecodedPyramid> texel_grad(decoded.size());
  parallel_for(decoded.size(), [&](std::size_t l) {
    texel_grad[l] = zero_texel_grad(decoded[l]);
    for (Eigen::Index p = 0; p < dx.cols(); ++p) {
      const Eigen::Vector3d g = dx.block<3, 1>(Eigen::Index(3 * l), p);
      if (g.isZero(0.0)) continue;
      scatter_taps(trilinear_taps(decoded[l].sizes, batch.uv(0, p), batch.uv(1, p), scales[l]), g, texel_grad[l]);
    }
  });
  for (std::size_t l = 0; l < decoded.size(); ++l)
    decode_pyramid_backward(model.layers[l], texel_grad[l], grad.layers[l]);
  return loss;
}

double scheduled_lr(double lr0, double gamma, long t) { return lr0 * std::pow(gamma, double(t)); }

void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, double lr, const AdamHyper& hyper) {
  if (params.size() != grads.size()) throw ConfigError("adam_step: parameter/gradient count mismatch");
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.push_back(Eigen::VectorXd::Zero(Eigen::Index(p.size())));
      state.second.push_back(Eigen::VectorXd::Zero(Eigen::Index(p.size())));
    }
  }
  if (state.first.size() != params.size()) throw ConfigError("adam_step: optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, double(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size() || Eigen::Index(params[t].size()) != state.first[t].size())
      throw ConfigError("adam_step: shape mismatch in tensor " + std::to_string(t));
    Eigen::Map<Eigen::ArrayXd> p(params[t].data(), Eigen::Index(params[t].size()));
    const Eigen::Map<const Eigen::ArrayXd> g(grads[t].data(), Eigen::Index(grads[t].size()));
    auto m = state.first[t].array();
    auto v = state.second[t].array();
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.square();
    p -= lr * (m / c1) / ((v / c2).sqrt() + hyper.epsilon);
  }
}

double eval_loss(const Model& model, const MaterialStack& stack, int grid) {
  const std::vector<DecodedPyramid> decoded = decode_all(model);
  double total = 0.0;
  for (int m = 0; m < stack.mip_count(); ++m)
    total += run_batch(model, decoded, &stack, grid_batch(grid, m), nullptr, nullptr, nullptr);
  return total / stack.mip_count();
}

Model quantized_model(const Model& model) {
  Model q;
  q.mlp = model.mlp;
  q.base_size = model.base_size;
  q.layers.reserve(model.layers.size());
  for (const FeaturePyramid& l : model.layers)
    q.layers.push_back(l.storage() == FeaturePyramid::Storage::Block ? quantize_pyramid(l) : l);
  return q;
}

TrainResult train(const MaterialStack& stack, const TrainConfig& config,
                  const std::function<void(const LogRow&)>& on_log) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  TrainResult result;
  Model& model = result.model;
  model = make_model(config, stack.base_size(), stack.channels(), rng);
  const AdamHyper hyper{config.adam_beta1, config.adam_beta2, config.adam_epsilon};
  long global = 0;

  const auto run_phase = [&](int phase, int iters, double lr_features, double gamma) {
    AdamState feature_state, mlp_state;
    const long qat_start = phase == 2 ? iters - std::lround(config.qat_fraction * iters) : iters;
    Model quantized;
    for (long t = 0; t < iters; ++t, ++global) {
      const Batch batch = sample_batch(rng, config.batch_grid, stack.mip_count());
      ModelGrad grad = ModelGrad::zeros_like(model);
      double loss;
      if (t >= qat_start) {
        quantized = quantized_model(model);
        loss = backprop_batch(quantized, stack, batch, grad);
      } else {
        loss = backprop_batch(model, stack, batch, grad);
      }
      if (!std::isfinite(loss))
        throw DivergenceError("non-finite loss in phase " + std::to_string(phase) + " at iteration " +
                              std::to_string(t));
      const double lr_f = scheduled_lr(lr_features, gamma, t);
      const double lr_m = scheduled_lr(config.lr_mlp, gamma, t);
      adam_step(feature_state, feature_params(model.layers), const_view(feature_params(grad.layers)), lr_f, hyper);
      adam_step(mlp_state, model.mlp.parameters(), const_view(grad.mlp.parameters()), lr_m, hyper);
      if (phase == 2)
        for (FeaturePyramid& l : model.layers) project_params(l);
      if (t % config.log_every == 0 || t == iters - 1) {
        result.log.push_back({global, phase, loss, -10.0 * std::log10(loss / stack.channels()), lr_f, lr_m});
        if (on_log) on_log(result.log.back());
      }
    }
  };

  using Clock = std::chrono::steady_clock;
  auto start = Clock::now();
  run_phase(1, config.phase1_iters, config.lr_features_p1, config.gamma_p1);
  result.phase1_final_loss = eval_loss(model, stack, config.batch_grid);
  for (FeaturePyramid& l : model.layers) l = init_from_raw(l, config.mode);
  result.phase2_initial_loss = eval_loss(model, stack, config.batch_grid);
  result.phase1_seconds = std::chrono::duration<double>(Clock::now() - start).count();

  start = Clock::now();
  run_phase(2, config.phase2_iters, config.lr_features_p2, config.gamma_p2);
  result.phase2_final_loss = eval_loss(model, stack, config.batch_grid);
  result.quantized_final_loss = eval_loss(quantized_model(model), stack, config.batch_grid);
  result.phase2_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (!std::isfinite(result.phase2_final_loss)) throw DivergenceError("non-finite loss after training");
  return result;
}

void write_log_csv(std::ostream& out, const std::vector<LogRow>& log) {
  out << "iteration,phase,loss,psnr,lr_features,lr_mlp\n";
  char line[160];
  for (const LogRow& r : log) {
    std::snprintf(line, sizeof line, "%ld,%d,%.10g,%.6f,%.10g,%.10g\n", r.iteration, r.phase, r.loss, r.psnr, r.lr_features,
                  r.lr_mlp);
    out << line;
  }
}

}  // namespace bcf
