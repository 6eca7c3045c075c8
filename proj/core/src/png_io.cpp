#include "semcom/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "semcom/common.hpp"

namespace semcom {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

PngImage read_png(const std::string& path, bool keep_palette_indices) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open '" + path + "' for reading");

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw DataError("'" + path + "' is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode PNG '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);

  int channels;
  if (color_type == PNG_COLOR_TYPE_PALETTE && keep_palette_indices) {
    if (bit_depth < 8) png_set_packing(png);  // one index per byte
    channels = 1;
  } else if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    channels = 3;
  } else if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    channels = 1;
  } else {
    channels = 3;
  }

  png_read_update_info(png, info);

  PngImage img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = channels;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  img.pixels.resize(static_cast<std::size_t>(img.height) * rowbytes);

  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] = img.pixels.data() + static_cast<std::size_t>(y) * rowbytes;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (rowbytes != static_cast<std::size_t>(img.width) * channels) {
    throw DataError("unexpected PNG row layout in '" + path + "'");
  }
  return img;
}

void write_png(const std::string& path, const PngImage& img, int color_type) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode PNG '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t rowbytes = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * rowbytes);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

PngImage read_png_rgb(const std::string& path) {
  PngImage img = read_png(path, false);
  if (img.channels == 1) {
    PngImage rgb;
    rgb.width = img.width;
    rgb.height = img.height;
    rgb.channels = 3;
    rgb.pixels.resize(img.pixels.size() * 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      rgb.pixels[i * 3] = rgb.pixels[i * 3 + 1] = rgb.pixels[i * 3 + 2] = img.pixels[i];
    }
    return rgb;
  }
  return img;
}

PngImage read_png_labels(const std::string& path) {
  PngImage img = read_png(path, true);
  if (img.channels != 1) {
    throw DataError("mask '" + path + "' is RGB; expected a gray or palette-indexed PNG");
  }
  return img;
}

void write_png_rgb(const std::string& path, const PngImage& img) {
  if (img.channels != 3) throw DataError("write_png_rgb: image must have 3 channels");
  write_png(path, img, PNG_COLOR_TYPE_RGB);
}

void write_png_gray(const std::string& path, const PngImage& img) {
  if (img.channels != 1) throw DataError("write_png_gray: image must have 1 channel");
  write_png(path, img, PNG_COLOR_TYPE_GRAY);
}

}  // namespace semcom
