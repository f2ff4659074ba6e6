#include "bcf/package.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "bcf/error.hpp"
#include "bcf/material.hpp"
#include "bcf/parallel.hpp"
#include "bcf/train_config.hpp"
#include "bcf/trainer.hpp"

namespace bcf {

namespace {

using nlohmann::json;

std::string layer_file(int i) { return "layer" + std::to_string(i) + ".dds"; }

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void check_manifest(const Manifest& m) {
  if (m.format_version != kManifestVersion)
    throw LoadError("unsupported manifest version " + std::to_string(m.format_version));
  if (int(m.layers.size()) != kPackageLayers)
    throw LoadError("manifest lists " + std::to_string(m.layers.size()) + " layers, expected 4");
  if (int(m.channels.size()) != kMaterialChannels)
    throw LoadError("manifest lists " + std::to_string(m.channels.size()) + " channels, expected 8");
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const ManifestLayer& l = m.layers[i];
    if (l.size < 4 || (l.size & (l.size - 1)) != 0 || l.mips < 1 || (l.size >> (l.mips - 1)) < 4)
      throw LoadError("manifest layer " + std::to_string(i) + " has invalid size " + std::to_string(l.size) + " / " +
                      std::to_string(l.mips) + " mips");
    if (!l.mode.exportable()) throw LoadError("manifest layer " + std::to_string(i) + " uses a non-hardware profile");
    if (l.file.empty() || l.file.find('/') != std::string::npos || l.file.find('\\') != std::string::npos)
      throw LoadError("manifest layer " + std::to_string(i) + " has an invalid file name");
  }
  if (m.base_size < 4 || m.hidden_width < 1) throw LoadError("manifest has invalid base_size or hidden_width");
}

}  // namespace

std::string Manifest::to_json() const {
  json j;
  j["format_version"] = format_version;
  j["preset"] = preset;
  j["material_id"] = material_id;
  j["base_size"] = base_size;
  j["hidden_width"] = hidden_width;
  j["layers"] = json::array();
  for (const ManifestLayer& l : layers)
    j["layers"].push_back({{"file", l.file},
                           {"size", l.size},
                           {"mips", l.mips},
                           {"mode",
                            {{"signed", l.mode.signedness == Signedness::Signed},
                             {"endpoint_bits", l.mode.endpoint_bits},
                             {"index_bits", l.mode.index_bits}}}});
  j["channels"] = channels;
  j["weights_file"] = weights_file;
  j["provenance"] = {{"seed", provenance.seed},
                     {"phase1_iters", provenance.phase1_iters},
                     {"phase2_iters", provenance.phase2_iters},
                     {"final_loss", provenance.final_loss}};
  return j.dump(2) + "\n";
}

Manifest Manifest::from_json(const std::string& text) {
  Manifest m;
  try {
    const json j = json::parse(text);
    m.format_version = j.at("format_version").get<int>();
    m.preset = j.at("preset").get<std::string>();
    m.material_id = j.at("material_id").get<std::string>();
    m.base_size = j.at("base_size").get<int>();
    m.hidden_width = j.at("hidden_width").get<int>();
    for (const json& l : j.at("layers")) {
      ManifestLayer layer;
      layer.file = l.at("file").get<std::string>();
      layer.size = l.at("size").get<int>();
      layer.mips = l.at("mips").get<int>();
      const json& mode = l.at("mode");
      layer.mode.signedness = mode.at("signed").get<bool>() ? Signedness::Signed : Signedness::Unsigned;
      layer.mode.endpoint_bits = mode.at("endpoint_bits").get<int>();
      layer.mode.index_bits = mode.at("index_bits").get<int>();
      m.layers.push_back(layer);
    }
    m.channels = j.at("channels").get<std::vector<std::string>>();
    m.weights_file = j.at("weights_file").get<std::string>();
    const json& p = j.at("provenance");
    m.provenance.seed = p.at("seed").get<std::uint64_t>();
    m.provenance.phase1_iters = p.at("phase1_iters").get<long>();
    m.provenance.phase2_iters = p.at("phase2_iters").get<long>();
    m.provenance.final_loss = p.at("final_loss").get<double>();
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed manifest: ") + e.what());
  }
  check_manifest(m);
  return m;
}

std::uintmax_t NeuralMaterialPackage::byte_size() const {
  std::uintmax_t n = weight_blob.size() + manifest.to_json().size();
  for (const DdsTexture& t : textures) n += dds_file_bytes(t.width, t.height, t.mip_count());
  return n;
}

Manifest make_manifest(const Model& model, const TrainConfig& config, const std::string& material_id,
                       double final_loss) {
  Manifest m;
  m.preset = config.preset;
  m.material_id = material_id;
  m.base_size = model.base_size;
  m.hidden_width = model.mlp.hidden_width();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const FeaturePyramid& p = model.layers[i];
    m.layers.push_back({p.size(), p.mip_count(), p.mode(), layer_file(int(i))});
  }
  m.channels.assign(channel_semantics().begin(), channel_semantics().end());
  m.provenance = {config.seed, config.phase1_iters, config.phase2_iters, final_loss};
  return m;
}

NeuralMaterialPackage build_package(const Model& model, Manifest manifest) {
  if (int(model.layers.size()) != kPackageLayers)
    throw ExportError("a package needs exactly 4 feature layers, model has " + std::to_string(model.layers.size()));
  for (const FeaturePyramid& p : model.layers) {
    if (!p.mode().exportable())
      throw ExportError("layer " + std::to_string(p.layer_id()) + " uses the " + std::to_string(p.mode().index_bits) +
                        "-bit index research profile, which has no BC6H hardware encoding");
    if (p.storage() != FeaturePyramid::Storage::Block)
      throw ExportError("layer " + std::to_string(p.layer_id()) + " still holds raw texels; finish phase 2 first");
  }
  if (model.mlp.output_width() != kMaterialChannels)
    throw ExportError("decoder outputs " + std::to_string(model.mlp.output_width()) + " channels, expected 8");

  NeuralMaterialPackage pkg;
  pkg.weight_blob = export_weights(model.mlp);
  pkg.mlp = import_weights(pkg.weight_blob);

  for (const FeaturePyramid& p : model.layers) {
    DdsTexture tex;
    tex.width = tex.height = p.size();
    for (const BlockGrid& grid : p.blocks()) {
      std::vector<Bc6Word> words(std::size_t(grid.block_count()));
      parallel_for(grid.block_count(), [&](int b) {
        words[std::size_t(b)] = pack_block(to_codes(quantize_block(grid.block(b))));
      });
      tex.mips.push_back(std::move(words));
    }
    pkg.textures.push_back(std::move(tex));
  }

  manifest.base_size = model.base_size;
  manifest.hidden_width = model.mlp.hidden_width();
  manifest.layers.resize(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const FeaturePyramid& p = model.layers[i];
    manifest.layers[i].size = p.size();
    manifest.layers[i].mips = p.mip_count();
    manifest.layers[i].mode = p.mode();
    if (manifest.layers[i].file.empty()) manifest.layers[i].file = layer_file(int(i));
  }
  try {
    check_manifest(manifest);
  } catch (const LoadError& e) {
    throw ExportError(e.what());
  }
  pkg.manifest = std::move(manifest);
  return pkg;
}

void write_package(const NeuralMaterialPackage& pkg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < pkg.textures.size(); ++i)
    write_dds(dir / pkg.manifest.layers[i].file, pkg.textures[i]);
  write_bytes(dir / pkg.manifest.weights_file, pkg.weight_blob);
  const std::string text = pkg.manifest.to_json();
  write_bytes(dir / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

NeuralMaterialPackage export_package(const Model& model, const Manifest& manifest, const std::filesystem::path& dir) {
  NeuralMaterialPackage pkg = build_package(model, manifest);
  write_package(pkg, dir);
  return pkg;
}

NeuralMaterialPackage import_package(const std::filesystem::path& dir) {
  NeuralMaterialPackage pkg;
  const std::filesystem::path manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw LoadError("missing " + manifest_path.string());
  {
    const std::vector<std::uint8_t> bytes = read_bytes(manifest_path);
    try {
      pkg.manifest = Manifest::from_json(std::string(bytes.begin(), bytes.end()));
    } catch (const LoadError& e) {
      throw LoadError(manifest_path.string() + ": " + e.what());
    }
  }
  const Manifest& m = pkg.manifest;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const ManifestLayer& l = m.layers[i];
    const std::filesystem::path path = dir / l.file;
    const std::string name = "layer " + std::to_string(i) + " (" + path.string() + ")";
    if (!std::filesystem::exists(path)) throw LoadError(name + ": file missing");
    DdsTexture tex;
    try {
      tex = decode_dds(read_bytes(path));
    } catch (const FormatError& e) {
      throw LoadError(name + ": " + e.what());
    }
    if (tex.width != l.size || tex.height != l.size || tex.mip_count() != l.mips)
      throw LoadError(name + ": texture is " + std::to_string(tex.width) + "x" + std::to_string(tex.height) + " with " +
                      std::to_string(tex.mip_count()) + " mips, manifest says " + std::to_string(l.size) + "x" +
                      std::to_string(l.size) + " with " + std::to_string(l.mips));
    for (int mip = 0; mip < tex.mip_count(); ++mip)
      for (const Bc6Word& w : tex.mips[std::size_t(mip)]) {
        try {
          unpack_block(w);
        } catch (const FormatError& e) {
          throw LoadError(name + ", mip " + std::to_string(mip) + ": " + e.what());
        }
      }
    pkg.textures.push_back(std::move(tex));
  }
  const std::filesystem::path weights = dir / m.weights_file;
  if (!std::filesystem::exists(weights)) throw LoadError("missing " + weights.string());
  pkg.weight_blob = read_bytes(weights);
  try {
    pkg.mlp = import_weights(pkg.weight_blob);
  } catch (const FormatError& e) {
    throw LoadError(weights.string() + ": " + e.what());
  }
  if (pkg.mlp.input_width() != 3 * kPackageLayers || pkg.mlp.hidden_width() != m.hidden_width ||
      pkg.mlp.output_width() != int(m.channels.size()))
    throw LoadError(weights.string() + ": decoder shape does not match the manifest");
  return pkg;
}

FeaturePyramid texture_to_pyramid(const DdsTexture& texture, int layer_id, const Bc6Mode& mode) {
  FeaturePyramid p(layer_id, texture.width, texture.mip_count(), FeaturePyramid::Storage::Block, mode);
  for (int m = 0; m < texture.mip_count(); ++m) {
    BlockGrid& grid = p.blocks()[std::size_t(m)];
    const auto& words = texture.mips[std::size_t(m)];
    for (int b = 0; b < grid.block_count(); ++b) grid.set_block(b, from_codes(unpack_block(words[std::size_t(b)]), mode));
  }
  return p;
}

std::uintmax_t package_bytes(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw LoadError("missing " + manifest_path.string());
  const std::vector<std::uint8_t> bytes = read_bytes(manifest_path);
  const Manifest m = Manifest::from_json(std::string(bytes.begin(), bytes.end()));
  std::uintmax_t n = bytes.size();
  for (const ManifestLayer& l : m.layers) n += std::filesystem::file_size(dir / l.file);
  return n + std::filesystem::file_size(dir / m.weights_file);
}

}  // namespace bcf
