#pragma once

#include <string>
#include <vector>

#include "semcom/metrics.hpp"
#include "semcom/nn.hpp"
#include "semcom/rx_kb.hpp"

namespace semcom {

struct ReconDecoderConfig {
  int depth = 4;         // transformer blocks per refinement pass
  int patch_size = 2;
  int attention_heads = 4;
  int embed_dim = 64;
  int refine_steps = 4;  // K
  int up_channels = 12;  // grid channels after unpatchify

  void validate() const;
};

// Iterative refinement decoder: the received grid and the receiver-KB feature
// are patchified and fused, refined K times through weight-tied attention
// blocks with per-step time embeddings and positional encodings, then
// upsampled and cleaned by a residual block. Output is clamped to [0,1].
class ReconDecoder {
 public:
  ReconDecoder(ParamStore& store, std::string prefix, const ReconDecoderConfig& cfg,
               SignalLayout layout, int image_h, int image_w, int feature_channels);

  // steps == 0 uses the configured K. pre_clamp, when given, receives the
  // head output before the [0,1] clamp (training uses it to keep saturated
  // pixels trainable).
  VarId forward(Graph& g, VarId y_real, VarId f, int steps = 0,
                VarId* pre_clamp = nullptr) const;
  Tensor decode(const ComplexSignal& y, const RxFeature& f, int steps = 0) const;

  const ReconDecoderConfig& config() const { return cfg_; }

 private:
  ReconDecoderConfig cfg_;
  SignalLayout layout_;
  int image_h_, image_w_;
  int feature_channels_;
  int token_h_ = 0, token_w_ = 0;

  IndexMap patchify_;
  IndexMap unpatchify_;
  IndexMap head_taps_idx_;
  CoefMap head_taps_coef_;
  int up_factor_ = 1;
  Tensor pos_embed_;
  Linear token_embed_;
  std::vector<TransformerBlock> blocks_;
  Linear unembed_;
  ResidualBlock res_;
  Conv2d head_;
};

struct SegDecoderConfig {
  int channels = 32;
  int kernel = 3;
  double dropout = 0.1;
  int num_classes = 21;

  void validate() const;
};

// Residual segmentation decoder: two identity-skip blocks on the fused
// (signal grid, selected rx feature) input, bilinear upsample to the image
// grid and a 1x1 head to per-class logits. Dropout only acts in training.
class SegDecoder {
 public:
  SegDecoder(ParamStore& store, std::string prefix, const SegDecoderConfig& cfg,
             SignalLayout layout, int image_h, int image_w, int feature_channels);

  VarId forward(Graph& g, VarId y_real, VarId f_selected, bool training = false,
                Rng* dropout_rng = nullptr) const;
  Tensor decode(const ComplexSignal& y, const RxFeature& f) const;  // [H,W,C] logits

  const SegDecoderConfig& config() const { return cfg_; }

 private:
  SegDecoderConfig cfg_;
  SignalLayout layout_;
  int image_h_, image_w_;
  int feature_channels_;

  IndexMap up_idx_;
  CoefMap up_coef_;
  Conv2d entry_;
  ResidualBlock block1_, block2_;
  Conv2d head_;
};

// Mean per-pixel softmax cross-entropy against ground-truth labels,
// max-stabilized; ignore-labeled pixels are excluded.
double loss_segmentation(const Tensor& logits, const SegmentationMask& mask);

}  // namespace semcom
