#include "semcom/evaluation.hpp"

#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "semcom/common.hpp"
#include "semcom/metrics.hpp"

namespace semcom {

namespace {

EvalPoint evaluate_point(const Pipeline& pipeline, const Dataset& val, TaskId task,
                         const EvalOptions& opts, std::size_t point_index) {
  const auto& cfg = pipeline.config();
  EvalPoint pt;
  pt.snr_db = opts.snr_list[point_index];
  pt.noiseless = cfg.channel_noiseless;
  const BandwidthReport bw = pipeline.encoder().bandwidth();
  pt.symbol_count = bw.symbol_count;
  pt.bandwidth_bits = bw.bits;
  pt.bound_compliant = bw.within_bound;

  const bool dump = !opts.visualize_dir.empty() && opts.visualize_count > 0;
  if (dump) std::filesystem::create_directories(opts.visualize_dir);
  auto vis_path = [&](std::size_t img_index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "vis_snr%g_img%02zu.png", pt.snr_db, img_index);
    return (std::filesystem::path(opts.visualize_dir) / buf).string();
  };

  if (task == TaskId::RECONSTRUCT) {
    double psnr_sum = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      const Sample& s = val.sample(i);
      const ChannelConfig ch = cfg.channel_config(
          pt.snr_db, derive_seed(opts.seed ^ 0xEE7Aull, point_index, i));
      const Tensor out = pipeline.reconstruct(s.image, ch, opts.refine_steps);
      psnr_sum += psnr(s.image, out, 1.0);
      if (dump && static_cast<int>(i) < opts.visualize_count) {
        write_png_rgb(vis_path(i), hstack(image_to_png(s.image), image_to_png(out)));
      }
    }
    pt.psnr_db = psnr_sum / static_cast<double>(val.size());
  } else {
    SegmentationScorer scorer(cfg.seg_classes());
    for (std::size_t i = 0; i < val.size(); ++i) {
      const Sample& s = val.sample(i);
      if (!s.has_mask) throw DataError("segmentation evaluation needs masks ('" + s.stem + "')");
      const ChannelConfig ch = cfg.channel_config(
          pt.snr_db, derive_seed(opts.seed ^ 0xEE7Aull, point_index, i));
      const SegmentationMask pred = pipeline.segment(s.image, ch);
      scorer.add(pred, s.mask);
      if (dump && static_cast<int>(i) < opts.visualize_count) {
        write_png_rgb(vis_path(i),
                      hstack(image_to_png(s.image),
                             hstack(colorize_mask(s.mask), colorize_mask(pred))));
      }
    }
    pt.mean_iou = scorer.mean_iou();
    pt.pixel_accuracy = scorer.pixel_accuracy();
  }
  return pt;
}

}  // namespace

std::vector<EvalPoint> evaluate_sweep(const Pipeline& pipeline, const Dataset& val,
                                      TaskId task, const EvalOptions& opts) {
  if (opts.snr_list.empty()) throw ConfigError("evaluation needs a non-empty SNR list");
  if (val.size() == 0) throw DataError("evaluation dataset is empty");

  std::vector<EvalPoint> points(opts.snr_list.size());
  int threads = opts.threads > 0 ? opts.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(opts.snr_list.size())));

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&](int tid) {
    for (std::size_t k = static_cast<std::size_t>(tid); k < opts.snr_list.size();
         k += static_cast<std::size_t>(threads)) {
      try {
        points[k] = evaluate_point(pipeline, val, task, opts, k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return points;  // snr_list order regardless of scheduling
}

}  // namespace semcom
