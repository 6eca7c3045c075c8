#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semcom {

// 8-bit image buffer, row-major, `channels` interleaved samples per pixel.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray / palette index) or 3 (rgb)
  std::vector<std::uint8_t> pixels;
};

// Reads any PNG as 8-bit RGB (palette and gray expanded, alpha stripped).
PngImage read_png_rgb(const std::string& path);

// Reads a label image: gray PNGs yield gray levels, palette PNGs yield the
// raw palette indices (the usual encoding of segmentation masks).
PngImage read_png_labels(const std::string& path);

void write_png_rgb(const std::string& path, const PngImage& img);
void write_png_gray(const std::string& path, const PngImage& img);

}  // namespace semcom
