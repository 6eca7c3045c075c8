#pragma once

#include <string>
#include <vector>

#include "semcom/pipeline.hpp"

namespace semcom {

struct EvalPoint {
  double snr_db = 0.0;
  bool noiseless = false;
  // reconstruction
  double psnr_db = 0.0;
  // segmentation (dataset-aggregated)
  double mean_iou = 0.0;
  double pixel_accuracy = 0.0;
  // bandwidth accounting
  std::int64_t symbol_count = 0;
  double bandwidth_bits = 0.0;
  bool bound_compliant = false;
};

struct EvalOptions {
  std::vector<double> snr_list;
  std::uint64_t seed = 0;
  int refine_steps = 0;  // reconstruction K override; 0 keeps the trained K
  int threads = 0;
  std::string visualize_dir;  // empty disables image dumps
  int visualize_count = 0;
};

// SNR sweep over a validation set against read-only parameters. Points may
// run concurrently; results come back in snr_list order and the evaluation
// noise is seeded per (point, sample).
std::vector<EvalPoint> evaluate_sweep(const Pipeline& pipeline, const Dataset& val,
                                      TaskId task, const EvalOptions& opts);

}  // namespace semcom
