#include "bcf/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <ImfArray.h>
#include <ImfRgbaFile.h>
#include <png.h>

#include "bcf/error.hpp"

namespace bcf {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  for (char& c : e) c = char(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  *text = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

ImageF read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed for " + path.string());
  }
  ImageF image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_PACKING, nullptr);
  const int width = int(png_get_image_width(png, info));
  const int height = int(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  png_bytepp rows = png_get_rows(png, info);
  image = ImageF(channels, width, height);
  const float scale = depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
  for (int y = 0; y < height; ++y) {
    const png_bytep row = rows[y];
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = std::size_t(x) * std::size_t(channels) + std::size_t(c);
        const unsigned v = depth == 16 ? (unsigned(row[2 * i]) << 8) | row[2 * i + 1] : row[i];
        image.at(x, y)(c) = float(v) * scale;
      }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

ImageF read_exr(const std::filesystem::path& path) {
  try {
    Imf::RgbaInputFile file(path.string().c_str());
    const Imath::Box2i dw = file.dataWindow();
    const int width = dw.max.x - dw.min.x + 1, height = dw.max.y - dw.min.y + 1;
    Imf::Array2D<Imf::Rgba> pixels(height, width);
    file.setFrameBuffer(&pixels[0][0] - dw.min.x - dw.min.y * width, 1, std::size_t(width));
    file.readPixels(dw.min.y, dw.max.y);
    const bool alpha = (file.channels() & Imf::WRITE_A) != 0;
    ImageF image(alpha ? 4 : 3, width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const Imf::Rgba& p = pixels[y][x];
        image.at(x, y)(0) = p.r;
        image.at(x, y)(1) = p.g;
        image.at(x, y)(2) = p.b;
        if (alpha) image.at(x, y)(3) = p.a;
      }
    return image;
  } catch (const std::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

ImageF read_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".exr") return read_exr(path);
  throw IoError(path.string() + ": unsupported image type (expected .png or .exr)");
}

void write_png(const std::filesystem::path& path, const ImageF& image, int bit_depth) {
  const int channels = image.channels();
  if (channels < 1 || channels > 4) throw IoError("PNG output needs 1 to 4 channels");
  if (bit_depth != 8 && bit_depth != 16) throw IoError("PNG bit depth must be 8 or 16");
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed for " + path.string());
  }
  const int bytes = bit_depth / 8;
  std::vector<png_byte> buffer(std::size_t(image.width) * std::size_t(image.height) * std::size_t(channels * bytes));
  const float max = bit_depth == 16 ? 65535.0f : 255.0f;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < channels; ++c) {
        const float v = std::clamp(image.at(x, y)(c), 0.0f, 1.0f);
        const unsigned q = unsigned(std::lround(v * max));
        const std::size_t i = ((std::size_t(y) * std::size_t(image.width) + std::size_t(x)) * std::size_t(channels) +
                               std::size_t(c)) * std::size_t(bytes);
        if (bytes == 2) {
          buffer[i] = png_byte(q >> 8);
          buffer[i + 1] = png_byte(q & 0xFF);
        } else {
          buffer[i] = png_byte(q);
        }
      }
  std::vector<png_bytep> rows(std::size_t(image.height));
  for (int y = 0; y < image.height; ++y)
    rows[std::size_t(y)] = buffer.data() + std::size_t(y) * std::size_t(image.width) * std::size_t(channels * bytes);
  static constexpr int kColorTypes[] = {PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA, PNG_COLOR_TYPE_RGB,
                                        PNG_COLOR_TYPE_RGB_ALPHA};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, png_uint_32(image.width), png_uint_32(image.height), bit_depth, kColorTypes[channels - 1],
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_exr(const std::filesystem::path& path, const ImageF& image) {
  const int channels = image.channels();
  try {
    Imf::RgbaOutputFile file(path.string().c_str(), image.width, image.height,
                             channels == 4 ? Imf::WRITE_RGBA : Imf::WRITE_RGB);
    Imf::Array2D<Imf::Rgba> pixels(image.height, image.width);
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) {
        const auto v = image.at(x, y);
        pixels[y][x] = Imf::Rgba(v(0), channels > 1 ? v(1) : 0.0f, channels > 2 ? v(2) : 0.0f,
                                 channels > 3 ? v(3) : 1.0f);
      }
    file.setFrameBuffer(&pixels[0][0], 1, std::size_t(image.width));
    file.writePixels(image.height);
  } catch (const std::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace bcf
