#pragma once

// Commands behind the bcfmat tool. Each prints its resolved settings (seed
// included) to `out` before doing any work and throws bcf::Error on failure.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "bcf/eval.hpp"
#include "bcf/package.hpp"
#include "bcf/train_config.hpp"
#include "bcf/trainer.hpp"

namespace bcf {

struct MaterialPaths {
  std::filesystem::path albedo;
  std::filesystem::path normal;
  std::filesystem::path arm;
};

struct EncodeOptions {
  MaterialPaths material;
  std::string preset = "desk";
  /// JSON document applied on top of the preset.
  std::optional<std::filesystem::path> config;
  std::optional<int> iters_p1;
  std::optional<int> iters_p2;
  std::optional<int> hidden;
  std::optional<std::uint64_t> seed;
  /// Package directory; also receives train_log.csv and timing.json.
  std::filesystem::path out;
  /// Defaults to the name of the albedo texture's directory.
  std::string material_id;
};

struct EncodeSummary {
  TrainConfig config;
  TrainResult result;
  std::uintmax_t package_bytes = 0;
};

/// Preset, then the config file, then individual flags.
TrainConfig resolve_config(const EncodeOptions& options);
EncodeSummary cmd_encode(const EncodeOptions& options, std::ostream& out);

struct DecodeOptions {
  std::filesystem::path package;
  int mip = 0;
  /// Output side; defaults to the reference size of the mip.
  std::optional<int> size;
  bool jitter = false;
  std::uint64_t seed = 0;
  /// Receives albedo.png, normal.png and arm.png (16-bit).
  std::filesystem::path out;
};
void cmd_decode(const DecodeOptions& options, std::ostream& out);

struct EvalOptions {
  std::filesystem::path package;
  MaterialPaths reference;
  bool jitter = false;
  std::uint64_t seed = 0;
  /// Writes <out>.csv and <out>.json.
  std::filesystem::path out;
};
EvalReport cmd_eval(const EvalOptions& options, std::ostream& out);

/// Manifest, file sizes and per-layer statistics.
void cmd_inspect(const std::filesystem::path& package, std::ostream& out);

struct RoundTripStats {
  long blocks = 0;
  long failures = 0;
};
/// Random codes: pack, unpack, repack and decode must agree with the
/// canonical form. Deterministic given the seed.
RoundTripStats cmd_bc6_roundtrip(long blocks, std::uint64_t seed, std::ostream& out);

}  // namespace bcf
