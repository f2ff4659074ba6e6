#pragma once

// Exported neural material: four mipmapped BC6H DDS textures, the fp16
// decoder weights and a JSON manifest.
//
//   <dir>/manifest.json
//   <dir>/layer0.dds .. layer3.dds
//   <dir>/weights.bin

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bcf/dds.hpp"
#include "bcf/decoder.hpp"
#include "bcf/feature_grid.hpp"

namespace bcf {

struct Model;
struct TrainConfig;

inline constexpr int kManifestVersion = 1;
inline constexpr int kPackageLayers = 4;

struct ManifestLayer {
  int size = 0;
  int mips = 0;
  Bc6Mode mode;
  std::string file;
  friend bool operator==(const ManifestLayer&, const ManifestLayer&) = default;
};

struct Provenance {
  std::uint64_t seed = 0;
  long phase1_iters = 0;
  long phase2_iters = 0;
  double final_loss = 0.0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Manifest {
  int format_version = kManifestVersion;
  std::string preset;
  std::string material_id;
  /// Base resolution of the reference the decoder was fitted to.
  int base_size = 0;
  int hidden_width = 0;
  std::vector<ManifestLayer> layers;
  std::vector<std::string> channels;
  std::string weights_file = "weights.bin";
  Provenance provenance;

  friend bool operator==(const Manifest&, const Manifest&) = default;

  std::string to_json() const;
  /// Throws LoadError on malformed documents or violated invariants.
  static Manifest from_json(const std::string& text);
};

struct NeuralMaterialPackage {
  Manifest manifest;
  std::vector<DdsTexture> textures;
  /// Decoder as stored: every weight is an fp16 value.
  Decoder mlp;
  std::vector<std::uint8_t> weight_blob;

  /// DDS files, weight blob and manifest, headers included.
  std::uintmax_t byte_size() const;
};

/// Manifest describing `model` trained with `config`.
Manifest make_manifest(const Model& model, const TrainConfig& config, const std::string& material_id,
                       double final_loss);

/// Quantizes and packs every block of every layer and rounds the decoder to
/// fp16. Throws ExportError unless the model has four block-storage layers in
/// the hardware profile and an fp16-representable decoder.
NeuralMaterialPackage build_package(const Model& model, Manifest manifest);

/// Writes the package files into `dir` (created if needed).
void write_package(const NeuralMaterialPackage& package, const std::filesystem::path& dir);
/// build_package followed by write_package.
NeuralMaterialPackage export_package(const Model& model, const Manifest& manifest, const std::filesystem::path& dir);

/// Reads and validates a package directory. Throws LoadError naming the file
/// at fault (missing, unreadable, header/manifest mismatch).
NeuralMaterialPackage import_package(const std::filesystem::path& dir);

/// Quantized block parameters of one layer, recovered from its texture.
FeaturePyramid texture_to_pyramid(const DdsTexture& texture, int layer_id, const Bc6Mode& mode = Bc6Mode::hardware());

/// On-disk size of the manifest and the files it lists (other files in the
/// directory, such as training logs, are not part of the package).
std::uintmax_t package_bytes(const std::filesystem::path& dir);

}  // namespace bcf
