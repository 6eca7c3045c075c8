#pragma once

#include <string>

#include "semcom/channel.hpp"
#include "semcom/jscc_encoder.hpp"
#include "semcom/nn.hpp"
#include "semcom/task_kb.hpp"

namespace semcom {

// Receiver-side feature grid: residual-block output with its block index.
struct RxFeature {
  Tensor grid;  // [h, w, c]
  int block_index = 0;
  bool selected = false;
};

struct RxKbConfig {
  int channels = 32;  // width of both residual blocks
  int kernel = 3;

  void validate() const;
};

// Receiver source KB: folds the received signal back into the encoder's
// latent grid and runs two residual blocks. Selection returns g1+g2 for
// reconstruction and g1 untouched for segmentation.
class RxKb {
 public:
  RxKb(ParamStore& store, std::string prefix, const RxKbConfig& cfg, SignalLayout layout);

  struct Features {
    VarId entry, g1, g2;
  };
  Features generate(Graph& g, VarId y_real) const;
  VarId select(Graph& g, TaskId task, VarId g1, VarId g2) const;

  // eval-mode mirrors of the graph path
  struct FeaturePair {
    RxFeature g1, g2;
    Tensor entry;
  };
  FeaturePair generate_features(const ComplexSignal& y) const;
  static RxFeature select_rx_features(TaskId task, const RxFeature& g1, const RxFeature& g2);

  const SignalLayout& layout() const { return layout_; }
  int feature_channels() const { return cfg_.channels; }

 private:
  RxKbConfig cfg_;
  SignalLayout layout_;
  Conv2d entry_;
  ResidualBlock block1_, block2_;
};

}  // namespace semcom
