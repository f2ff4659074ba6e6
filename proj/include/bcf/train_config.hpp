#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bcf/bc6.hpp"

namespace bcf {

struct LayerConfig {
  int size = 0;
  int mips = 0;
  friend bool operator==(const LayerConfig&, const LayerConfig&) = default;
};

struct TrainConfig {
  std::string preset = "custom";
  std::vector<LayerConfig> layers;
  int hidden_width = 16;

  int phase1_iters = 5000;
  int phase2_iters = 200000;
  double lr_features_p1 = 5e-2;
  double lr_mlp = 1e-3;
  double gamma_p1 = 0.9995;
  double lr_features_p2 = 1e-2;
  double gamma_p2 = 0.99999;
  /// Side of the jittered uv grid drawn per iteration.
  int batch_grid = 512;
  std::uint64_t seed = 1;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// Raw features start uniform in [init_lo, init_hi].
  double init_lo = 0.0;
  double init_hi = 1.0;

  Bc6Mode mode = Bc6Mode::hardware();
  /// Trailing fraction of phase 2 trained through the quantized blocks
  /// (straight-through: the gradient taken at the rounded parameters updates
  /// the continuous ones). 0 trains purely through the soft decode.
  double qat_fraction = 1.0;
  /// Log row every this many iterations (plus first and last of each phase).
  int log_every = 100;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

  /// bcf-0.5k, bcf-1k, bcf-2k, or desk. Throws ConfigError for other names.
  static TrainConfig from_preset(const std::string& name);
  static std::vector<std::string> preset_names();

  /// Throws ConfigError describing the first inconsistency.
  void validate() const;

  std::string to_json() const;
  /// Keys not present keep the defaults of the named preset (or of a plain
  /// TrainConfig when no preset is given).
  static TrainConfig from_json(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
};

}  // namespace bcf
