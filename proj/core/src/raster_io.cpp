#include "bonelayer/raster_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace bonelayer {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngErrorSink {
  std::string message;
};

[[noreturn]] void on_png_error(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  if (sink != nullptr) sink->message = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct DecodedPng {
  Shape shape;
  int depth = 0;
  std::vector<std::uint16_t> samples;
};

DecodedPng decode_gray_png(const std::filesystem::path& path) {
  const std::string name = path.string();
  FilePtr fp(std::fopen(name.c_str(), "rb"));
  if (!fp) throw IoError(name, "cannot open for reading");

  png_byte signature[8];
  if (std::fread(signature, 1, 8, fp.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw IoError(name, "not a PNG file");
  }

  PngErrorSink sink;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, on_png_error, on_png_warning);
  if (png == nullptr) throw IoError(name, "cannot allocate PNG reader");
  png_infop info = png_create_info_struct(png);
  struct ReadGuard {
    png_structp* png;
    png_infop* info;
    ~ReadGuard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};
  if (info == nullptr) throw IoError(name, "cannot allocate PNG info");

  DecodedPng out;
  std::vector<png_byte> row;

  if (setjmp(png_jmpbuf(png))) {
    throw IoError(name, "corrupt PNG: " + sink.message);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int interlace = png_get_interlace_type(png, info);

  if (color_type != PNG_COLOR_TYPE_GRAY) {
    throw IoError(name, "not a single-channel grayscale PNG (colour type " +
                            std::to_string(color_type) + ")");
  }
  if (depth != 8 && depth != 16) {
    throw IoError(name, "unsupported bit depth " + std::to_string(depth));
  }
  if (interlace != PNG_INTERLACE_NONE) {
    throw IoError(name, "interlaced PNG is not supported");
  }

  out.shape = Shape{static_cast<int>(width), static_cast<int>(height)};
  out.depth = depth;
  out.samples.resize(out.shape.area());
  row.resize(png_get_rowbytes(png, info));

  for (png_uint_32 y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    std::uint16_t* dst = out.samples.data() + static_cast<std::size_t>(y) * width;
    if (depth == 8) {
      for (png_uint_32 x = 0; x < width; ++x) dst[x] = row[x];
    } else {
      for (png_uint_32 x = 0; x < width; ++x) {
        dst[x] = static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
      }
    }
  }
  png_read_end(png, nullptr);
  return out;
}

void encode_gray_png(const std::filesystem::path& path, Shape shape, int depth,
                     const std::vector<std::uint16_t>& samples) {
  const std::string name = path.string();
  FilePtr fp(std::fopen(name.c_str(), "wb"));
  if (!fp) throw IoError(name, "cannot open for writing");

  PngErrorSink sink;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, on_png_error, on_png_warning);
  if (png == nullptr) throw IoError(name, "cannot allocate PNG writer");
  png_infop info = png_create_info_struct(png);
  struct WriteGuard {
    png_structp* png;
    png_infop* info;
    ~WriteGuard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};
  if (info == nullptr) throw IoError(name, "cannot allocate PNG info");

  const std::size_t bytes_per_sample = depth == 16 ? 2 : 1;
  std::vector<png_byte> row(static_cast<std::size_t>(shape.width) * bytes_per_sample);

  if (setjmp(png_jmpbuf(png))) {
    throw IoError(name, "PNG encode failed: " + sink.message);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(shape.width),
               static_cast<png_uint_32>(shape.height), depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  for (int y = 0; y < shape.height; ++y) {
    const std::uint16_t* src = samples.data() + static_cast<std::size_t>(y) * shape.width;
    if (depth == 8) {
      for (int x = 0; x < shape.width; ++x) row[x] = static_cast<png_byte>(src[x]);
    } else {
      for (int x = 0; x < shape.width; ++x) {
        row[2 * x] = static_cast<png_byte>(src[x] >> 8);
        row[2 * x + 1] = static_cast<png_byte>(src[x] & 0xFF);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  if (std::fflush(fp.get()) != 0) throw IoError(name, "write failed");
}

double full_scale(int depth) { return depth == 16 ? 65535.0 : 255.0; }

}  // namespace

GrayImage load_raster(const std::filesystem::path& path) {
  const DecodedPng png = decode_gray_png(path);
  const double scale = full_scale(png.depth);
  ScalarField pixels(png.shape, 0.0);
  for (std::size_t i = 0; i < png.samples.size(); ++i) pixels[i] = png.samples[i] / scale;
  return GrayImage(std::move(pixels));
}

void save_raster(const GrayImage& img, const std::filesystem::path& path, BitDepth depth) {
  const int bits = static_cast<int>(depth);
  const double scale = full_scale(bits);
  std::vector<std::uint16_t> samples(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    samples[i] = static_cast<std::uint16_t>(std::floor(img[i] * scale + 0.5));
  }
  encode_gray_png(path, img.shape(), bits, samples);
}

BinaryMask load_mask(const std::filesystem::path& path) {
  const DecodedPng png = decode_gray_png(path);
  const auto on = static_cast<std::uint16_t>(full_scale(png.depth));
  Raster<std::uint8_t> bits(png.shape, 0);
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    const std::uint16_t v = png.samples[i];
    if (v != 0 && v != on) {
      throw IoError(path.string(), "mask pixel value " + std::to_string(v) +
                                       " is neither 0 nor " + std::to_string(on));
    }
    bits[i] = v == on ? 1 : 0;
  }
  return BinaryMask(std::move(bits));
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) samples[i] = mask[i] ? 255 : 0;
  encode_gray_png(path, mask.shape(), 8, samples);
}

}  // namespace bonelayer
