#include "semcom/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "semcom/common.hpp"
#include "semcom/rng.hpp"

namespace fs = std::filesystem;

namespace semcom {

std::string to_string(Split s) { return s == Split::train ? "train" : "val"; }

namespace {

// values representable exactly in 8-bit PNGs, so folder round-trips are lossless
double quantize8(double v) {
  return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

void validate_params(const SyntheticParams& p) {
  if (p.image_size < 16) throw ConfigError("synthetic image size must be >= 16");
  if (p.num_classes < 2) throw ConfigError("synthetic dataset needs >= 2 classes");
  if (p.shapes_min < 0 || p.shapes_max < p.shapes_min) {
    throw ConfigError("invalid shape count range");
  }
}

}  // namespace

void class_color(int class_id, double rgb[3]) {
  static constexpr double palette[][3] = {
      {0.16, 0.16, 0.18},  // background
      {0.85, 0.22, 0.20}, {0.20, 0.72, 0.28}, {0.22, 0.34, 0.88},
      {0.88, 0.80, 0.20}, {0.75, 0.25, 0.80}, {0.20, 0.78, 0.78},
      {0.92, 0.55, 0.15}, {0.55, 0.35, 0.20},
  };
  constexpr int n = static_cast<int>(sizeof(palette) / sizeof(palette[0]));
  const auto& c = palette[class_id % n];
  rgb[0] = c[0];
  rgb[1] = c[1];
  rgb[2] = c[2];
}

void draw_disk(Tensor& image, SegmentationMask& mask, double cx, double cy, double r,
               int class_id, const double color[3]) {
  const int H = image.dim(0), W = image.dim(1);
  const double r2 = r * r;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r2) {
        for (int c = 0; c < 3; ++c) image.at(y, x, c) = color[c];
        mask.at(y, x) = class_id;
      }
    }
}

void draw_rect(Tensor& image, SegmentationMask& mask, double cx, double cy, double hx,
               double hy, int class_id, const double color[3]) {
  const int H = image.dim(0), W = image.dim(1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (std::abs(x + 0.5 - cx) <= hx && std::abs(y + 0.5 - cy) <= hy) {
        for (int c = 0; c < 3; ++c) image.at(y, x, c) = color[c];
        mask.at(y, x) = class_id;
      }
    }
}

std::vector<Sample> generate_synthetic(const SyntheticParams& p, Split split) {
  validate_params(p);
  const int count = split == Split::train ? p.train_count : p.val_count;
  const std::uint64_t split_tag = split == Split::train ? 0x11 : 0x22;
  const int S = p.image_size;

  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    Rng rng(derive_seed(p.seed, split_tag, static_cast<std::uint64_t>(n)));
    Sample s;
    {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s_%05d", to_string(split).c_str(), n);
      s.stem = buf;
    }
    s.image = Tensor({S, S, 3});
    s.mask = SegmentationMask(S, S, 0);
    s.has_mask = true;

    // textured background: smooth two-color gradient plus speckle
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
      c0[c] = rng.uniform(0.05, 0.55);
      c1[c] = rng.uniform(0.05, 0.55);
    }
    const bool horizontal = rng.uniform() < 0.5;
    for (int y = 0; y < S; ++y) {
      for (int x = 0; x < S; ++x) {
        const double t = horizontal ? static_cast<double>(x) / (S - 1)
                                    : static_cast<double>(y) / (S - 1);
        for (int c = 0; c < 3; ++c) {
          const double v = c0[c] + t * (c1[c] - c0[c]) + p.texture * (rng.uniform() - 0.5);
          s.image.at(y, x, c) = quantize8(v);
        }
      }
    }

    const int shapes = rng.uniform_int(p.shapes_min, p.shapes_max);
    for (int k = 0; k < shapes; ++k) {
      const int cls = rng.uniform_int(1, p.num_classes - 1);
      double base[3];
      class_color(cls, base);
      double col[3];
      for (int c = 0; c < 3; ++c) col[c] = quantize8(base[c] + rng.uniform(-0.12, 0.12));
      const bool disk = rng.uniform() < 0.5;
      const double cx = rng.uniform(0.30, 0.70) * S;
      const double cy = rng.uniform(0.30, 0.70) * S;
      if (disk) {
        draw_disk(s.image, s.mask, cx, cy, rng.uniform(0.18, 0.32) * S, cls, col);
      } else {
        draw_rect(s.image, s.mask, cx, cy, rng.uniform(0.14, 0.28) * S,
                  rng.uniform(0.14, 0.28) * S, cls, col);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_dataset_folder(const std::string& root, const std::vector<Sample>& train,
                         const std::vector<Sample>& val) {
  fs::create_directories(fs::path(root) / "images");
  fs::create_directories(fs::path(root) / "masks");
  std::ofstream manifest(fs::path(root) / "manifest.txt");
  if (!manifest) throw DataError("cannot write manifest under '" + root + "'");
  auto dump = [&](const std::vector<Sample>& samples, const char* split) {
    for (const auto& s : samples) {
      write_png_rgb((fs::path(root) / "images" / (s.stem + ".png")).string(),
                    image_to_png(s.image));
      if (s.has_mask) {
        write_png_gray((fs::path(root) / "masks" / (s.stem + ".png")).string(),
                       mask_to_png(s.mask));
      }
      manifest << split << '\t' << s.stem << '\n';
    }
  };
  dump(train, "train");
  dump(val, "val");
}

namespace {

std::vector<Sample> load_folder(const DatasetSpec& spec) {
  const fs::path root(spec.root);
  std::ifstream manifest(root / "manifest.txt");
  if (!manifest) {
    throw DataError("cannot open dataset manifest '" + (root / "manifest.txt").string() + "'");
  }
  const std::string want = to_string(spec.split);
  std::vector<Sample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": expected <split><TAB><stem>");
    }
    if (line.substr(0, tab) != want) continue;
    Sample s;
    s.stem = line.substr(tab + 1);
    s.image = png_to_image(read_png_rgb((root / "images" / (s.stem + ".png")).string()));
    const fs::path mask_path = root / "masks" / (s.stem + ".png");
    if (fs::exists(mask_path)) {
      s.mask = png_to_mask(read_png_labels(mask_path.string()));
      s.has_mask = true;
      if (s.mask.height != s.image.dim(0) || s.mask.width != s.image.dim(1)) {
        throw DataError("mask for stem '" + s.stem + "' does not match the image size");
      }
      if (spec.num_classes > 0) {
        for (auto v : s.mask.labels) {
          if (v != kIgnoreLabel && (v < 0 || v >= spec.num_classes)) {
            throw DataError("stem '" + s.stem + "': mask label " + std::to_string(v) +
                            " >= num_classes " + std::to_string(spec.num_classes));
          }
        }
      }
    } else if (spec.require_masks) {
      throw DataError("no mask paired with stem '" + s.stem + "' (expected " +
                      mask_path.string() + ")");
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) {
    throw DataError("manifest lists no '" + want + "' samples in '" + spec.root + "'");
  }
  return samples;
}

}  // namespace

Dataset Dataset::load(const DatasetSpec& spec) {
  Dataset d;
  if (spec.kind == DatasetKind::synthetic) {
    d.samples_ = generate_synthetic(spec.synth, spec.split);
  } else {
    d.samples_ = load_folder(spec);
  }
  if (spec.resize > 0) {
    for (auto& s : d.samples_) {
      if (s.image.dim(0) != spec.resize || s.image.dim(1) != spec.resize) {
        s.image = resize_bilinear(s.image, spec.resize, spec.resize);
        if (s.has_mask) s.mask = resize_nearest(s.mask, spec.resize, spec.resize);
      }
    }
  }
  return d;
}

std::int64_t Dataset::num_batches(int batch_size) const {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  return (static_cast<std::int64_t>(samples_.size()) + batch_size - 1) / batch_size;
}

Dataset::Batch Dataset::load_batch(int batch_size, std::int64_t index,
                                   std::uint64_t epoch_seed) const {
  const std::int64_t nb = num_batches(batch_size);
  if (index < 0 || index >= nb) {
    throw DataError("batch index " + std::to_string(index) + " outside epoch range [0," +
                    std::to_string(nb - 1) + "]");
  }
  std::vector<std::size_t> order(samples_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(epoch_seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_u64() % i)]);
  }

  Batch b;
  const std::size_t begin = static_cast<std::size_t>(index) * batch_size;
  const std::size_t end = std::min(begin + static_cast<std::size_t>(batch_size), order.size());
  for (std::size_t i = begin; i < end; ++i) {
    const Sample& s = samples_[order[i]];
    b.images.push_back(s.image);
    if (s.has_mask) b.masks.push_back(s.mask);
  }
  if (!b.masks.empty() && b.masks.size() != b.images.size()) {
    throw DataError("batch mixes samples with and without masks");
  }
  return b;
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
  const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
  Tensor out({out_h, out_w, C});
  const double sy = static_cast<double>(H) / out_h;
  const double sx = static_cast<double>(W) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(H - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(W - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - x0;
      for (int c = 0; c < C; ++c) {
        const double top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

SegmentationMask resize_nearest(const SegmentationMask& mask, int out_h, int out_w) {
  SegmentationMask out(out_h, out_w);
  const double sy = static_cast<double>(mask.height) / out_h;
  const double sx = static_cast<double>(mask.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const int iy = std::min(static_cast<int>((y + 0.5) * sy), mask.height - 1);
    for (int x = 0; x < out_w; ++x) {
      const int ix = std::min(static_cast<int>((x + 0.5) * sx), mask.width - 1);
      out.at(y, x) = mask.at(iy, ix);
    }
  }
  return out;
}

PngImage image_to_png(const Tensor& img) {
  if (img.ndim() != 3 || img.dim(2) != 3) throw DataError("image_to_png: expects [H,W,3]");
  PngImage p;
  p.height = img.dim(0);
  p.width = img.dim(1);
  p.channels = 3;
  p.pixels.resize(static_cast<std::size_t>(p.height) * p.width * 3);
  for (std::size_t i = 0; i < p.pixels.size(); ++i) {
    p.pixels[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(img[static_cast<std::int64_t>(i)], 0.0, 1.0) * 255.0));
  }
  return p;
}

Tensor png_to_image(const PngImage& png) {
  if (png.channels != 3) throw DataError("png_to_image: expects RGB");
  Tensor img({png.height, png.width, 3});
  for (std::int64_t i = 0; i < img.size(); ++i) {
    img[i] = png.pixels[static_cast<std::size_t>(i)] / 255.0;
  }
  return img;
}

PngImage mask_to_png(const SegmentationMask& mask) {
  PngImage p;
  p.height = mask.height;
  p.width = mask.width;
  p.channels = 1;
  p.pixels.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto v = mask.labels[i];
    if (v < 0 || v > 255) throw DataError("mask label " + std::to_string(v) + " not 8-bit");
    p.pixels[i] = static_cast<std::uint8_t>(v);
  }
  return p;
}

SegmentationMask png_to_mask(const PngImage& png) {
  if (png.channels != 1) throw DataError("png_to_mask: expects single channel");
  SegmentationMask m(png.height, png.width);
  for (std::size_t i = 0; i < m.size(); ++i) m.labels[i] = png.pixels[i];
  return m;
}

PngImage colorize_mask(const SegmentationMask& mask) {
  PngImage p;
  p.height = mask.height;
  p.width = mask.width;
  p.channels = 3;
  p.pixels.resize(mask.size() * 3);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    double rgb[3] = {1.0, 1.0, 1.0};  // ignore label renders white
    if (mask.labels[i] != kIgnoreLabel) class_color(mask.labels[i], rgb);
    for (int c = 0; c < 3; ++c) {
      p.pixels[i * 3 + static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(std::lround(rgb[c] * 255.0));
    }
  }
  return p;
}

PngImage hstack(const PngImage& a, const PngImage& b) {
  if (a.height != b.height || a.channels != b.channels) {
    throw DataError("hstack: incompatible images");
  }
  PngImage out;
  out.height = a.height;
  out.width = a.width + b.width;
  out.channels = a.channels;
  out.pixels.resize(static_cast<std::size_t>(out.height) * out.width * out.channels);
  const int ac = a.width * a.channels, bc = b.width * b.channels;
  for (int y = 0; y < out.height; ++y) {
    std::copy_n(a.pixels.data() + static_cast<std::size_t>(y) * ac, ac,
                out.pixels.data() + static_cast<std::size_t>(y) * (ac + bc));
    std::copy_n(b.pixels.data() + static_cast<std::size_t>(y) * bc, bc,
                out.pixels.data() + static_cast<std::size_t>(y) * (ac + bc) + ac);
  }
  return out;
}

}  // namespace semcom
