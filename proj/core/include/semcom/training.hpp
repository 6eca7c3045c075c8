#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "semcom/data.hpp"
#include "semcom/pipeline.hpp"

namespace semcom {

// Decoupled-weight-decay adaptive-moment optimizer. The decay is applied as
// an exact scale p *= (1 - lr*wd), so zero gradients shrink parameters by
// exactly that factor.
class AdamW {
 public:
  AdamW(double lr, double beta1, double beta2, double weight_decay, double eps = 1e-8);

  // Updates every block that has an entry in `grads`; others are untouched.
  void step(ParamStore& params, const std::map<std::string, Tensor>& grads);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t step_count() const { return t_; }

 private:
  double lr_, beta1_, beta2_, weight_decay_, eps_;
  std::int64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double wall_time_s = 0.0;
};

// Seeded end-to-end trainer. Single-writer parameter updates; the per-sample
// forward/backward passes of a batch run on a small thread pool with
// gradients reduced in sample order, so results do not depend on thread count.
class Trainer {
 public:
  Trainer(Pipeline& pipeline, TaskId task);

  double train_step(const std::vector<Tensor>& images,
                    const std::vector<SegmentationMask>& masks, std::uint64_t step_index);

  std::vector<EpochLog> fit(const Dataset& train,
                            const std::function<void(const EpochLog&)>& on_epoch = nullptr);

  const AdamW& optimizer() const { return opt_; }
  TaskId task() const { return task_; }

 private:
  Pipeline& pipeline_;
  TaskId task_;
  AdamW opt_;
};

}  // namespace semcom
