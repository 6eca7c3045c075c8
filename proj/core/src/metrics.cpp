#include "semcom/metrics.hpp"

#include <cmath>
#include <limits>

#include "semcom/common.hpp"

namespace semcom {

double loss_reconstruction(const Tensor& original, const Tensor& reconstructed) {
  if (!original.same_shape(reconstructed)) {
    throw Error("loss_reconstruction: shape mismatch " + shape_str(original.dims()) +
                " vs " + shape_str(reconstructed.dims()));
  }
  double s = 0.0;
  for (std::int64_t i = 0; i < original.size(); ++i) {
    const double d = original[i] - reconstructed[i];
    s += d * d;
  }
  return s / static_cast<double>(original.size());
}

double psnr(const Tensor& original, const Tensor& reconstructed, double max_value) {
  if (!(max_value > 0.0)) throw Error("psnr: max_value must be positive");
  const double mse = loss_reconstruction(original, reconstructed);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse);
}

bool psnr_is_infinite(double v) { return std::isinf(v); }

namespace {

void check_mask_shapes(const SegmentationMask& a, const SegmentationMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw Error("mask shape mismatch " + std::to_string(a.height) + "x" +
                std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                std::to_string(b.width));
  }
}

}  // namespace

std::optional<double> iou(const SegmentationMask& pred, const SegmentationMask& truth,
                          int class_id) {
  check_mask_shapes(pred, truth);
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth.labels[i] == kIgnoreLabel) continue;
    const bool a = pred.labels[i] == class_id;
    const bool b = truth.labels[i] == class_id;
    inter += (a && b);
    uni += (a || b);
  }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mean_iou(const SegmentationMask& pred, const SegmentationMask& truth,
                int num_classes) {
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (auto v = iou(pred, truth, c)) {
      sum += *v;
      ++defined;
    }
  }
  if (defined == 0) throw Error("mean_iou: no class present in either mask");
  return sum / defined;
}

double pixel_accuracy(const SegmentationMask& pred, const SegmentationMask& truth) {
  check_mask_shapes(pred, truth);
  std::int64_t correct = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth.labels[i] == kIgnoreLabel) continue;
    correct += (pred.labels[i] == truth.labels[i]);
    ++total;
  }
  if (total == 0) throw Error("pixel_accuracy: every pixel is ignored");
  return static_cast<double>(correct) / static_cast<double>(total);
}

SegmentationScorer::SegmentationScorer(int num_classes)
    : num_classes_(num_classes),
      intersection_(static_cast<std::size_t>(num_classes), 0),
      union_(static_cast<std::size_t>(num_classes), 0) {
  if (num_classes < 2) throw Error("SegmentationScorer: need at least 2 classes");
}

void SegmentationScorer::add(const SegmentationMask& pred, const SegmentationMask& truth) {
  check_mask_shapes(pred, truth);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth.labels[i] == kIgnoreLabel) continue;
    const int p = pred.labels[i];
    const int t = truth.labels[i];
    if (p >= 0 && p < num_classes_) {
      ++union_[static_cast<std::size_t>(p)];
    }
    if (t >= 0 && t < num_classes_) {
      ++union_[static_cast<std::size_t>(t)];
      if (p == t) {
        ++intersection_[static_cast<std::size_t>(t)];
        --union_[static_cast<std::size_t>(t)];  // counted twice above
      }
    }
    correct_ += (p == t);
    ++total_;
  }
}

double SegmentationScorer::mean_iou() const {
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < num_classes_; ++c) {
    if (union_[static_cast<std::size_t>(c)] == 0) continue;
    sum += static_cast<double>(intersection_[static_cast<std::size_t>(c)]) /
           static_cast<double>(union_[static_cast<std::size_t>(c)]);
    ++defined;
  }
  if (defined == 0) throw Error("mean_iou: no class observed");
  return sum / defined;
}

double SegmentationScorer::pixel_accuracy() const {
  if (total_ == 0) throw Error("pixel_accuracy: no pixels observed");
  return static_cast<double>(correct_) / static_cast<double>(total_);
}

SegmentationMask argmax_mask(const Tensor& logits) {
  if (logits.ndim() != 3) throw Error("argmax_mask: expects [H,W,C] logits");
  const int H = logits.dim(0), W = logits.dim(1), C = logits.dim(2);
  SegmentationMask m(H, W);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      int best = 0;
      double bv = logits.at(i, j, 0);
      for (int c = 1; c < C; ++c) {
        if (logits.at(i, j, c) > bv) {
          bv = logits.at(i, j, c);
          best = c;
        }
      }
      m.at(i, j) = best;
    }
  }
  return m;
}

}  // namespace semcom
