#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcom/metrics.hpp"
#include "semcom/png_io.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

enum class DatasetKind { synthetic, folder };
enum class Split { train, val };

std::string to_string(Split s);

// Parameters of the synthetic shapes dataset: colored rectangles and disks
// with class-consistent colors on textured backgrounds, plus exact masks.
struct SyntheticParams {
  int image_size = 32;
  int num_classes = 3;  // background class 0 plus num_classes-1 shape classes
  int train_count = 512;
  int val_count = 64;
  int shapes_min = 1;
  int shapes_max = 2;
  double texture = 0.08;
  std::uint64_t seed = 7;
};

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic;
  Split split = Split::train;
  std::string root;  // folder datasets
  SyntheticParams synth;
  int num_classes = 0;  // folder datasets: 0 disables label validation
  int resize = 0;       // 0 keeps native resolution
  bool require_masks = true;
};

struct Sample {
  std::string stem;
  Tensor image;  // [H,W,3] in [0,1]
  SegmentationMask mask;
  bool has_mask = false;
};

std::vector<Sample> generate_synthetic(const SyntheticParams& params, Split split);

// shape rasterizers used by the generator; pixel (x,y) belongs to a disk when
// (x+0.5-cx)^2 + (y+0.5-cy)^2 <= r^2, to a rectangle when both half-extent
// inequalities hold
void draw_disk(Tensor& image, SegmentationMask& mask, double cx, double cy, double r,
               int class_id, const double color[3]);
void draw_rect(Tensor& image, SegmentationMask& mask, double cx, double cy, double hx,
               double hy, int class_id, const double color[3]);

// Folder layout: <root>/images/<stem>.png, <root>/masks/<stem>.png and a
// manifest.txt with one "<split>\t<stem>" line per sample.
void save_dataset_folder(const std::string& root, const std::vector<Sample>& train,
                         const std::vector<Sample>& val);

class Dataset {
 public:
  static Dataset load(const DatasetSpec& spec);

  std::size_t size() const { return samples_.size(); }
  const Sample& sample(std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }

  std::int64_t num_batches(int batch_size) const;

  struct Batch {
    std::vector<Tensor> images;
    std::vector<SegmentationMask> masks;  // empty when the dataset has no masks
  };
  // Deterministic under the epoch seed: the epoch order is a seeded shuffle.
  Batch load_batch(int batch_size, std::int64_t index, std::uint64_t epoch_seed) const;

 private:
  std::vector<Sample> samples_;
};

// bilinear for images, nearest for masks (labels stay exact)
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);
SegmentationMask resize_nearest(const SegmentationMask& mask, int out_h, int out_w);

// conversions between tensors/masks and 8-bit PNG buffers
PngImage image_to_png(const Tensor& img);
Tensor png_to_image(const PngImage& png);
PngImage mask_to_png(const SegmentationMask& mask);
SegmentationMask png_to_mask(const PngImage& png);
PngImage colorize_mask(const SegmentationMask& mask);
PngImage hstack(const PngImage& a, const PngImage& b);

// fixed palette used by the synthetic generator and mask visualization
void class_color(int class_id, double rgb[3]);

}  // namespace semcom
