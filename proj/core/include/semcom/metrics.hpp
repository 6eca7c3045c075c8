#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

inline constexpr int kIgnoreLabel = 255;

// Per-pixel class labels. Label 255 marks pixels excluded from loss and metrics.
struct SegmentationMask {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> labels;  // row-major

  SegmentationMask() = default;
  SegmentationMask(int h, int w, std::int32_t fill = 0)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  std::int32_t& at(int i, int j) { return labels[static_cast<std::size_t>(i) * width + j]; }
  std::int32_t at(int i, int j) const { return labels[static_cast<std::size_t>(i) * width + j]; }
  std::size_t size() const { return labels.size(); }
  bool operator==(const SegmentationMask&) const = default;
};

// Mean squared error over all scalar pixel values. Shapes must match.
double loss_reconstruction(const Tensor& original, const Tensor& reconstructed);

// 10*log10(max^2 / mse); a zero MSE reports +infinity explicitly.
double psnr(const Tensor& original, const Tensor& reconstructed, double max_value = 1.0);
bool psnr_is_infinite(double v);

// Intersection over union for one class. Ignore-labeled truth pixels are
// excluded from both sets; empty union yields nullopt (class undefined).
std::optional<double> iou(const SegmentationMask& pred, const SegmentationMask& truth,
                          int class_id);

// Average of the defined per-class IoUs over classes 0..num_classes-1.
// Throws if no class is defined.
double mean_iou(const SegmentationMask& pred, const SegmentationMask& truth,
                int num_classes);

// Fraction of non-ignored pixels whose predicted label matches the truth.
double pixel_accuracy(const SegmentationMask& pred, const SegmentationMask& truth);

// Streaming per-class counts, for dataset-level mIoU / accuracy.
class SegmentationScorer {
 public:
  explicit SegmentationScorer(int num_classes);
  void add(const SegmentationMask& pred, const SegmentationMask& truth);
  double mean_iou() const;
  double pixel_accuracy() const;

 private:
  int num_classes_;
  std::vector<std::int64_t> intersection_;
  std::vector<std::int64_t> union_;
  std::int64_t correct_ = 0;
  std::int64_t total_ = 0;
};

// Argmax over the class dimension of H x W x C logits; ties break to the
// lowest class id.
SegmentationMask argmax_mask(const Tensor& logits);

}  // namespace semcom
