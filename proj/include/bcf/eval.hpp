#pragma once

// Quality metrics and per-mip evaluation reports.
//
// Values are compared on a [0, 1] scale. PSNR of identical images is +inf.
// Channel groups: albedo (0-2), normal (3-4), arm (5-7) and all eight.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bcf/image.hpp"
#include "bcf/material.hpp"

namespace bcf {

struct Batch;
class RuntimeMaterial;

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Mean squared error over every channel and pixel. DomainError on a shape mismatch.
double mse(const ImageD& a, const ImageD& b);
/// -10 log10(mse); +inf when mse is 0.
double psnr_from_mse(double mse);
double psnr(const ImageD& a, const ImageD& b);

/// Gaussian-window SSIM (11x11, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2), mean
/// over the valid window positions of each channel, then over channels.
/// DomainError if either side is smaller than the window.
double ssim(const ImageD& a, const ImageD& b);

enum ChannelGroup { kAlbedo = 0, kNormal = 1, kArm = 2, kAll = 3 };
inline constexpr int kGroupCount = 4;
const std::array<std::string, kGroupCount>& group_names();
/// Rows of an 8-channel image that belong to group g.
ImageD group_view(const ImageD& image, ChannelGroup g);

struct MipMetrics {
  int mip = 0;
  int size = 0;
  std::array<double, kGroupCount> mse{};
  std::array<double, kGroupCount> psnr{};
  /// NaN when the mip is smaller than the SSIM window.
  std::array<double, kGroupCount> ssim{};
};

struct EvalReport {
  std::string preset;
  std::string material_id;
  std::uint64_t seed = 0;
  long iterations = 0;
  bool jitter = false;
  std::uint64_t jitter_seed = 0;
  std::uintmax_t package_bytes = 0;
  std::vector<MipMetrics> mips;
  /// -10 log10 of the mean over mips of the MSE, per group.
  std::array<double, kGroupCount> aggregate_psnr{};
  /// Mean SSIM over the mips where it is defined (NaN if none).
  std::array<double, kGroupCount> aggregate_ssim{};
};

/// Decoded values at every point of a batch, channels x points.
using BatchDecoder = std::function<Eigen::MatrixXd(const Batch&)>;

/// Compares `decode` with reference_sample at the same points for every mip
/// of the reference: pixel centres, or one uniform sample per pixel cell when
/// jittered (seeded by `seed`, one stream per mip).
EvalReport evaluate(const BatchDecoder& decode, const MaterialStack& stack, bool jitter, std::uint64_t seed);
/// evaluate() on the hardware decode path, with package metadata filled in.
EvalReport eval_package(const RuntimeMaterial& material, const MaterialStack& stack, bool jitter, std::uint64_t seed);

void aggregate(EvalReport& report);

/// Writes `<stem>.csv` (one row per mip) and `<stem>.json` (the full report).
/// Infinite values are written as "inf", undefined ones as "nan".
void report_write(const EvalReport& report, const std::filesystem::path& stem);
EvalReport report_read_json(const std::filesystem::path& path);
std::vector<MipMetrics> report_read_csv(const std::filesystem::path& path);

}  // namespace bcf
