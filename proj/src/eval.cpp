#include "bcf/eval.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bcf/error.hpp"
#include "bcf/parallel.hpp"
#include "bcf/runtime.hpp"
#include "bcf/trainer.hpp"

namespace bcf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_same_shape(const ImageD& a, const ImageD& b) {
  if (a.width != b.width || a.height != b.height || a.channels() != b.channels())
    throw DomainError("image shapes differ: " + std::to_string(a.channels()) + "x" + std::to_string(a.width) + "x" +
                      std::to_string(a.height) + " vs " + std::to_string(b.channels()) + "x" +
                      std::to_string(b.width) + "x" + std::to_string(b.height));
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int k = 0; k < kSsimWindow; ++k) {
    const double d = k - kSsimWindow / 2;
    w[std::size_t(k)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[std::size_t(k)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Gaussian-weighted average over every window that fits entirely inside the
// image; result is (w - 10) x (h - 10), row-major.
Eigen::ArrayXXd filter_valid(const Eigen::ArrayXXd& img) {
  static const std::array<double, kSsimWindow> g = gaussian_window();
  const Eigen::Index rows = img.rows(), cols = img.cols();
  const Eigen::Index out_r = rows - kSsimWindow + 1, out_c = cols - kSsimWindow + 1;
  Eigen::ArrayXXd horiz = Eigen::ArrayXXd::Zero(rows, out_c);
  for (int k = 0; k < kSsimWindow; ++k) horiz += g[std::size_t(k)] * img.middleCols(k, out_c);
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(out_r, out_c);
  for (int k = 0; k < kSsimWindow; ++k) out += g[std::size_t(k)] * horiz.middleRows(k, out_r);
  return out;
}

double ssim_channel(const Eigen::ArrayXXd& x, const Eigen::ArrayXXd& y) {
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const Eigen::ArrayXXd mx = filter_valid(x), my = filter_valid(y);
  const Eigen::ArrayXXd vx = filter_valid(x * x) - mx * mx;
  const Eigen::ArrayXXd vy = filter_valid(y * y) - my * my;
  const Eigen::ArrayXXd cxy = filter_valid(x * y) - mx * my;
  const Eigen::ArrayXXd s =
      ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  return s.mean();
}

Eigen::ArrayXXd channel_plane(const ImageD& img, int c) {
  // Rows are image rows; the row-major pixel layout maps onto a transposed map.
  return Eigen::Map<const Eigen::ArrayXXd, 0, Eigen::InnerStride<>>(img.pixels.data() + c, img.width, img.height,
                                                                    Eigen::InnerStride<>(img.channels()))
      .transpose();
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw FormatError("not a number: '" + s + "'");
  return v;
}

nlohmann::json to_json_number(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

double from_json_number(const nlohmann::json& j) {
  return j.is_string() ? parse_number(j.get<std::string>()) : j.get<double>();
}

nlohmann::json group_json(const std::array<double, kGroupCount>& values) {
  nlohmann::json j;
  for (int g = 0; g < kGroupCount; ++g) j[group_names()[std::size_t(g)]] = to_json_number(values[std::size_t(g)]);
  return j;
}

std::array<double, kGroupCount> group_from_json(const nlohmann::json& j) {
  std::array<double, kGroupCount> out{};
  for (int g = 0; g < kGroupCount; ++g) out[std::size_t(g)] = from_json_number(j.at(group_names()[std::size_t(g)]));
  return out;
}

std::string csv_header() {
  std::string h = "mip,size";
  for (const char* metric : {"mse", "psnr", "ssim"})
    for (const std::string& g : group_names()) h += std::string(",") + metric + "_" + g;
  return h;
}

}  // namespace

double mse(const ImageD& a, const ImageD& b) {
  check_same_shape(a, b);
  if (a.pixels.size() == 0) throw DomainError("empty images");
  return (a.pixels - b.pixels).squaredNorm() / double(a.pixels.size());
}

double psnr_from_mse(double m) {
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

double psnr(const ImageD& a, const ImageD& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const ImageD& a, const ImageD& b) {
  check_same_shape(a, b);
  if (a.width < kSsimWindow || a.height < kSsimWindow)
    throw DomainError("SSIM needs at least 11x11 pixels, image is " + std::to_string(a.width) + "x" +
                      std::to_string(a.height));
  double sum = 0.0;
  for (int c = 0; c < a.channels(); ++c) sum += ssim_channel(channel_plane(a, c), channel_plane(b, c));
  return sum / a.channels();
}

const std::array<std::string, kGroupCount>& group_names() {
  static const std::array<std::string, kGroupCount> names{"albedo", "normal", "arm", "all"};
  return names;
}

ImageD group_view(const ImageD& image, ChannelGroup g) {
  if (image.channels() != kMaterialChannels) throw DomainError("expected an 8-channel image");
  static constexpr int first[] = {0, 3, 5, 0}, count[] = {3, 2, 3, 8};
  ImageD out(count[g], image.width, image.height);
  out.pixels = image.pixels.middleRows(first[g], count[g]);
  return out;
}

void aggregate(EvalReport& r) {
  for (int g = 0; g < kGroupCount; ++g) {
    double mse_sum = 0.0, ssim_sum = 0.0;
    int ssim_n = 0;
    for (const MipMetrics& m : r.mips) {
      mse_sum += m.mse[std::size_t(g)];
      if (!std::isnan(m.ssim[std::size_t(g)])) {
        ssim_sum += m.ssim[std::size_t(g)];
        ++ssim_n;
      }
    }
    r.aggregate_psnr[std::size_t(g)] = r.mips.empty() ? kNaN : psnr_from_mse(mse_sum / double(r.mips.size()));
    r.aggregate_ssim[std::size_t(g)] = ssim_n ? ssim_sum / ssim_n : kNaN;
  }
}

EvalReport evaluate(const BatchDecoder& decode, const MaterialStack& stack, bool jitter, std::uint64_t seed) {
  EvalReport r;
  r.jitter = jitter;
  r.jitter_seed = seed;
  for (int m = 0; m < stack.mip_count(); ++m) {
    const int size = stack.mips[std::size_t(m)].width;
    const Batch batch = pixel_batch(size, m, jitter, seed + std::uint64_t(m));
    ImageD decoded(stack.channels(), size, size), reference(stack.channels(), size, size);
    decoded.pixels = decode(batch);
    reference.pixels = reference_batch(stack, batch);
    if (decoded.pixels.rows() != reference.pixels.rows() || decoded.pixels.cols() != reference.pixels.cols())
      throw DomainError("decoder returned " + std::to_string(decoded.pixels.rows()) + " channels, reference has " +
                        std::to_string(reference.pixels.rows()));

    MipMetrics mm;
    mm.mip = m;
    mm.size = size;
    std::array<ImageD, kGroupCount> dv, rv;
    for (int g = 0; g < kGroupCount; ++g) {
      dv[std::size_t(g)] = group_view(decoded, ChannelGroup(g));
      rv[std::size_t(g)] = group_view(reference, ChannelGroup(g));
    }
    parallel_for(kGroupCount, [&](std::size_t g) {
      mm.mse[g] = mse(dv[g], rv[g]);
      mm.psnr[g] = psnr_from_mse(mm.mse[g]);
      mm.ssim[g] = size >= kSsimWindow ? ssim(dv[g], rv[g]) : kNaN;
    });
    r.mips.push_back(mm);
  }
  aggregate(r);
  return r;
}

EvalReport eval_package(const RuntimeMaterial& material, const MaterialStack& stack, bool jitter, std::uint64_t seed) {
  if (material.base_size() != stack.base_size())
    throw DomainError("package was fitted at " + std::to_string(material.base_size()) + "^2, reference is " +
                      std::to_string(stack.base_size()) + "^2");
  EvalReport r = evaluate([&](const Batch& b) { return material.decode_batch(b); }, stack, jitter, seed);
  const Manifest& m = material.package().manifest;
  r.preset = m.preset;
  r.material_id = m.material_id;
  r.seed = m.provenance.seed;
  r.iterations = m.provenance.phase1_iters + m.provenance.phase2_iters;
  r.package_bytes = material.package().byte_size();
  return r;
}

void report_write(const EvalReport& r, const std::filesystem::path& stem) {
  std::filesystem::path csv_path = stem, json_path = stem;
  csv_path += ".csv";
  json_path += ".json";
  {
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot write " + csv_path.string());
    out << csv_header() << "\n";
    for (const MipMetrics& m : r.mips) {
      out << m.mip << "," << m.size;
      for (const auto* values : {&m.mse, &m.psnr, &m.ssim})
        for (double v : *values) out << "," << fmt(v);
      out << "\n";
    }
    if (!out) throw IoError("short write to " + csv_path.string());
  }
  nlohmann::json j;
  j["schema_version"] = 1;
  j["preset"] = r.preset;
  j["material_id"] = r.material_id;
  j["seed"] = r.seed;
  j["iterations"] = r.iterations;
  j["jitter"] = r.jitter;
  j["jitter_seed"] = r.jitter_seed;
  j["package_bytes"] = r.package_bytes;
  j["aggregate_psnr"] = group_json(r.aggregate_psnr);
  j["aggregate_ssim"] = group_json(r.aggregate_ssim);
  j["mips"] = nlohmann::json::array();
  for (const MipMetrics& m : r.mips)
    j["mips"].push_back(
        {{"mip", m.mip}, {"size", m.size}, {"mse", group_json(m.mse)}, {"psnr", group_json(m.psnr)}, {"ssim", group_json(m.ssim)}});
  std::ofstream out(json_path);
  if (!out) throw IoError("cannot write " + json_path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("short write to " + json_path.string());
}

EvalReport report_read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  EvalReport r;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("schema_version").get<int>() != 1) throw FormatError(path.string() + ": unsupported schema version");
    r.preset = j.at("preset").get<std::string>();
    r.material_id = j.at("material_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.iterations = j.at("iterations").get<long>();
    r.jitter = j.at("jitter").get<bool>();
    r.jitter_seed = j.at("jitter_seed").get<std::uint64_t>();
    r.package_bytes = j.at("package_bytes").get<std::uintmax_t>();
    r.aggregate_psnr = group_from_json(j.at("aggregate_psnr"));
    r.aggregate_ssim = group_from_json(j.at("aggregate_ssim"));
    for (const auto& e : j.at("mips")) {
      MipMetrics m;
      m.mip = e.at("mip").get<int>();
      m.size = e.at("size").get<int>();
      m.mse = group_from_json(e.at("mse"));
      m.psnr = group_from_json(e.at("psnr"));
      m.ssim = group_from_json(e.at("ssim"));
      r.mips.push_back(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return r;
}

std::vector<MipMetrics> report_read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw FormatError(path.string() + ": unexpected CSV header");
  std::vector<MipMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 2 + 3 * kGroupCount) throw FormatError(path.string() + ": malformed row '" + line + "'");
    MipMetrics m;
    m.mip = int(parse_number(fields[0]));
    m.size = int(parse_number(fields[1]));
    for (int g = 0; g < kGroupCount; ++g) {
      m.mse[std::size_t(g)] = parse_number(fields[std::size_t(2 + g)]);
      m.psnr[std::size_t(g)] = parse_number(fields[std::size_t(2 + kGroupCount + g)]);
      m.ssim[std::size_t(g)] = parse_number(fields[std::size_t(2 + 2 * kGroupCount + g)]);
    }
    rows.push_back(m);
  }
  return rows;
}

}  // namespace bcf
