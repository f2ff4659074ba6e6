// bcfmat: encode materials into BC6H neural packages, decode, evaluate and
// inspect them.
//
// Exit status: 0 on success, 1 when a command fails, CLI11's codes for usage
// errors. BCF_THREADS sets the worker count.

#include <iostream>

#include <CLI11.hpp>

#include "bcf/cli.hpp"
#include "bcf/error.hpp"

namespace {

void add_material(CLI::App* cmd, bcf::MaterialPaths& paths, const std::string& what) {
  cmd->add_option("--albedo", paths.albedo, what + " albedo texture (RGB)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--normal", paths.normal, what + " normal texture (x, y in R, G)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--arm", paths.arm, what + " ambient occlusion / roughness / metalness texture")
      ->required()
      ->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural materials stored in BC6H textures"};
  app.require_subcommand(1);

  bcf::EncodeOptions encode;
  auto* enc = app.add_subcommand("encode", "Train a material and export its package");
  add_material(enc, encode.material, "reference");
  enc->add_option("--preset", encode.preset, "bcf-0.5k, bcf-1k, bcf-2k or desk")->capture_default_str();
  enc->add_option("--config", encode.config, "JSON overrides applied on top of the preset")->check(CLI::ExistingFile);
  enc->add_option("--iters-p1", encode.iters_p1, "Phase-1 iterations")->check(CLI::NonNegativeNumber);
  enc->add_option("--iters-p2", encode.iters_p2, "Phase-2 iterations")->check(CLI::NonNegativeNumber);
  enc->add_option("--seed", encode.seed, "Random seed");
  enc->add_option("--hidden", encode.hidden, "Decoder hidden width")->check(CLI::PositiveNumber);
  enc->add_option("--id", encode.material_id, "Material id stored in the manifest");
  enc->add_option("--out", encode.out, "Package directory")->required();

  bcf::DecodeOptions decode;
  auto* dec = app.add_subcommand("decode", "Render one mip of a package to albedo/normal/arm PNGs");
  dec->add_option("package", decode.package, "Package directory")->required()->check(CLI::ExistingDirectory);
  dec->add_option("--mip", decode.mip, "Mip level")->capture_default_str();
  dec->add_option("--size", decode.size, "Output side (default: the mip's size)")->check(CLI::PositiveNumber);
  dec->add_flag("--jitter", decode.jitter, "One random sample per pixel instead of pixel centres");
  dec->add_option("--seed", decode.seed, "Jitter seed")->capture_default_str();
  dec->add_option("--out", decode.out, "Output directory")->required();

  bcf::EvalOptions eval;
  auto* ev = app.add_subcommand("eval", "Per-mip PSNR/SSIM of a package against reference textures");
  ev->add_option("package", eval.package, "Package directory")->required()->check(CLI::ExistingDirectory);
  add_material(ev, eval.reference, "reference");
  ev->add_flag("--jitter", eval.jitter, "One random sample per pixel instead of pixel centres");
  ev->add_option("--seed", eval.seed, "Jitter seed")->capture_default_str();
  ev->add_option("--out", eval.out, "Report stem (writes <stem>.csv and <stem>.json)")->required();

  std::filesystem::path inspect_dir;
  auto* ins = app.add_subcommand("inspect", "Print the manifest, file sizes and layer statistics");
  ins->add_option("package", inspect_dir, "Package directory")->required()->check(CLI::ExistingDirectory);

  long rt_blocks = 10000;
  std::uint64_t rt_seed = 1;
  auto* rt = app.add_subcommand("bc6-roundtrip", "Random BC6H pack/unpack/decode consistency run");
  rt->add_option("--blocks", rt_blocks, "Number of random blocks")->capture_default_str()->check(CLI::NonNegativeNumber);
  rt->add_option("--seed", rt_seed, "Random seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*enc) {
      bcf::cmd_encode(encode, std::cout);
    } else if (*dec) {
      bcf::cmd_decode(decode, std::cout);
    } else if (*ev) {
      bcf::cmd_eval(eval, std::cout);
    } else if (*ins) {
      bcf::cmd_inspect(inspect_dir, std::cout);
    } else if (*rt) {
      if (bcf::cmd_bc6_roundtrip(rt_blocks, rt_seed, std::cout).failures > 0) return 1;
    }
  } catch (const bcf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
