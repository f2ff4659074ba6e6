#include "bcf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bcf/assets.hpp"
#include "bcf/error.hpp"
#include "bcf/half.hpp"
#include "bcf/image_io.hpp"
#include "bcf/parallel.hpp"
#include "bcf/runtime.hpp"

namespace bcf {

namespace {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

MaterialStack load(const MaterialPaths& p) { return load_material(p.albedo, p.normal, p.arm); }

std::string fmt(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

void print_report(const EvalReport& r, std::ostream& out) {
  out << "mip  size  psnr_albedo psnr_normal psnr_arm psnr_all  ssim_all\n";
  for (const MipMetrics& m : r.mips) {
    out << std::setw(3) << m.mip << std::setw(6) << m.size;
    for (double p : m.psnr) out << std::setw(12) << fmt(p, 3);
    out << std::setw(10) << fmt(m.ssim[kAll], 4) << "\n";
  }
  out << "aggregate psnr";
  for (int g = 0; g < kGroupCount; ++g) out << " " << group_names()[std::size_t(g)] << "=" << fmt(r.aggregate_psnr[g], 3);
  out << "\naggregate ssim";
  for (int g = 0; g < kGroupCount; ++g) out << " " << group_names()[std::size_t(g)] << "=" << fmt(r.aggregate_ssim[g], 4);
  out << "\n";
}

}  // namespace

TrainConfig resolve_config(const EncodeOptions& o) {
  TrainConfig c = TrainConfig::from_preset(o.preset);
  if (o.config) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(*o.config));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(o.config->string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(o.config->string() + ": expected a JSON object");
    if (!j.contains("preset")) j["preset"] = o.preset;
    c = TrainConfig::from_json(j.dump());
  }
  if (o.iters_p1) c.phase1_iters = *o.iters_p1;
  if (o.iters_p2) c.phase2_iters = *o.iters_p2;
  if (o.hidden) c.hidden_width = *o.hidden;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

EncodeSummary cmd_encode(const EncodeOptions& o, std::ostream& out) {
  EncodeSummary s;
  s.config = resolve_config(o);
  const std::string id = o.material_id.empty() ? fs::absolute(o.material.albedo).parent_path().filename().string()
                                               : o.material_id;
  out << "seed " << s.config.seed << "\n"
      << "threads " << thread_count() << "\n"
      << "config " << s.config.to_json() << "\n";

  const MaterialStack stack = load(o.material);
  out << "material " << id << " " << stack.base_size() << "x" << stack.base_size() << ", " << stack.mip_count()
      << " mips\n";

  s.result = train(stack, s.config, [&](const LogRow& row) {
    out << "iter " << row.iteration << " phase " << row.phase << " loss " << fmt(row.loss, 6) << " psnr "
        << fmt(row.psnr, 2) << "\n";
  });
  out << "phase1 final loss " << fmt(s.result.phase1_final_loss, 6) << ", phase2 initial loss "
      << fmt(s.result.phase2_initial_loss, 6) << ", quantized final loss " << fmt(s.result.quantized_final_loss, 6)
      << "\n";

  const Manifest manifest = make_manifest(s.result.model, s.config, id, s.result.quantized_final_loss);
  const NeuralMaterialPackage pkg = export_package(s.result.model, manifest, o.out);
  s.package_bytes = package_bytes(o.out);

  std::ofstream log(o.out / "train_log.csv", std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot write " + (o.out / "train_log.csv").string());
  write_log_csv(log, s.result.log);

  // Wall-clock figures live apart from the log so identical runs give
  // identical logs.
  const DecodeTiming decode = time_decode(RuntimeMaterial(pkg), 20000, s.config.seed);
  nlohmann::json timing = {{"threads", thread_count()},
                           {"phase1_seconds", s.result.phase1_seconds},
                           {"phase2_seconds", s.result.phase2_seconds},
                           {"decode_ns_per_pixel", decode.ns_per_pixel()}};
  write_text(o.out / "timing.json", timing.dump(2) + "\n");

  out << "package " << o.out.string() << " " << s.package_bytes << " bytes\n";
  return s;
}

void cmd_decode(const DecodeOptions& o, std::ostream& out) {
  const RuntimeMaterial material(import_package(o.package));
  const int size = o.size.value_or(std::max(material.base_size() >> std::max(o.mip, 0), 1));
  out << "seed " << o.seed << "\n"
      << "mip " << o.mip << " size " << size << " jitter " << (o.jitter ? "on" : "off") << "\n";
  const ImageD img = render_decoded(material, size, o.mip, {o.jitter, o.seed});
  const MaterialViews views = split_material(img.cast<float>());
  fs::create_directories(o.out);
  write_png(o.out / "albedo.png", views.albedo, 16);
  write_png(o.out / "normal.png", views.normal, 16);
  write_png(o.out / "arm.png", views.arm, 16);
  out << "wrote " << (o.out / "albedo.png").string() << ", normal.png, arm.png\n";
}

EvalReport cmd_eval(const EvalOptions& o, std::ostream& out) {
  const RuntimeMaterial material(import_package(o.package));
  out << "seed " << o.seed << "\n"
      << "jitter " << (o.jitter ? "on" : "off") << "\n";
  EvalReport r = eval_package(material, load(o.reference), o.jitter, o.seed);
  r.jitter = o.jitter;
  r.jitter_seed = o.seed;
  r.package_bytes = package_bytes(o.package);
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  report_write(r, o.out);
  print_report(r, out);
  return r;
}

void cmd_inspect(const fs::path& dir, std::ostream& out) {
  const NeuralMaterialPackage pkg = import_package(dir);
  const Manifest& m = pkg.manifest;
  const std::uintmax_t total = package_bytes(dir);
  out << "preset " << m.preset << "\n"
      << "material " << m.material_id << "\n"
      << "base size " << m.base_size << "\n"
      << "seed " << m.provenance.seed << "\n"
      << "iterations " << m.provenance.phase1_iters << " + " << m.provenance.phase2_iters << "\n"
      << "final loss " << fmt(m.provenance.final_loss, 6) << "\n"
      << "decoder 12 -> " << m.hidden_width << " -> " << m.channels.size() << "\n";
  out << "files\n";
  out << "  manifest.json " << fs::file_size(dir / "manifest.json") << "\n";
  for (const ManifestLayer& l : m.layers) out << "  " << l.file << " " << fs::file_size(dir / l.file) << "\n";
  out << "  " << m.weights_file << " " << fs::file_size(dir / m.weights_file) << "\n";
  out << "total " << total << " bytes (" << fmt(double(total) / (1024.0 * 1024.0), 3) << " MiB)\n";

  for (std::size_t l = 0; l < pkg.textures.size(); ++l) {
    const DdsTexture& t = pkg.textures[l];
    std::array<long, 32> partitions{};
    long blocks = 0, code_sum = 0;
    int code_min = 63, code_max = 0;
    for (const auto& level : t.mips)
      for (const Bc6Word& w : level) {
        const BlockCodes c = unpack_block(w);
        ++partitions[c.partition];
        ++blocks;
        for (const auto& e : c.endpoints)
          for (std::uint8_t v : e) {
            code_sum += v;
            code_min = std::min<int>(code_min, v);
            code_max = std::max<int>(code_max, v);
          }
      }
    const DecodedPyramid texels = decode_texture_hw(t);
    const auto& base = texels.mips[0];
    out << "layer " << l << ": " << t.width << "x" << t.height << ", " << t.mip_count() << " mips, " << blocks
        << " blocks, partitions used " << std::count_if(partitions.begin(), partitions.end(), [](long n) { return n; })
        << "/32, endpoint codes [" << code_min << ", " << code_max << "] mean "
        << fmt(double(code_sum) / double(std::max(blocks * 12, 1L)), 2) << ", mip 0 texels";
    for (int c = 0; c < 3; ++c)
      out << " c" << c << " [" << fmt(base.row(c).minCoeff(), 4) << ", " << fmt(base.row(c).maxCoeff(), 4) << "]";
    out << "\n";
  }
}

RoundTripStats cmd_bc6_roundtrip(long blocks, std::uint64_t seed, std::ostream& out) {
  out << "seed " << seed << "\n"
      << "blocks " << blocks << "\n";
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> code(0, 63), index(0, 7), part(0, 31);
  RoundTripStats s;
  for (long i = 0; i < blocks; ++i) {
    BlockCodes c;
    for (auto& e : c.endpoints)
      for (auto& v : e) v = std::uint8_t(code(rng));
    for (auto& v : c.indices) v = std::uint8_t(index(rng));
    c.partition = std::uint8_t(part(rng));

    const BlockCodes canonical = canonicalize(c);
    const Bc6Word word = pack_block(c);
    bool ok = unpack_block(word) == canonical && pack_block(canonical) == word && is_canonical(canonical);
    ok = ok && (decode_block_soft(from_codes(c)) - decode_block_soft(from_codes(canonical))).cwiseAbs().maxCoeff() == 0.0;
    ++s.blocks;
    if (!ok) {
      ++s.failures;
      if (s.failures <= 10) out << "failure at block " << i << "\n";
    }
  }
  out << (s.failures == 0 ? "PASS" : "FAIL") << " " << s.blocks - s.failures << "/" << s.blocks << "\n";
  return s;
}

}  // namespace bcf
