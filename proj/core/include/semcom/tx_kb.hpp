#pragma once

#include <array>
#include <string>
#include <vector>

#include "semcom/nn.hpp"
#include "semcom/task_kb.hpp"

namespace semcom {

enum class FeatureLevel { low, mid, high, selected };

// Spatial feature grid with its pipeline-stage tag.
struct FeatureMap {
  Tensor grid;  // [h, w, c]
  FeatureLevel level = FeatureLevel::low;
};

struct StageShape {
  int h = 0, w = 0, c = 0;
};

struct ExtractorConfig {
  int patch_size = 4;
  int window_size = 7;
  int embed_dim = 96;
  int attention_heads = 3;
  std::array<int, 3> depths = {1, 1, 1};
  bool shifted_windows = false;
  double mlp_ratio = 4.0;

  // grid/window/head divisibility at every stage; throws ConfigError
  std::array<StageShape, 3> validate(int image_h, int image_w) const;
};

// Three hierarchical windowed-attention stages with patch merging between
// them: f1 (low), f2 (mid), f3 (high); spatial side halves and channels
// double per merge.
class HierarchicalExtractor {
 public:
  HierarchicalExtractor(ParamStore& store, std::string prefix, const ExtractorConfig& cfg,
                        int image_h, int image_w);

  struct Features {
    VarId f1, f2, f3;
  };
  Features forward(Graph& g, VarId image) const;

  std::array<FeatureMap, 3> extract(const Tensor& image) const;
  const std::array<StageShape, 3>& stage_shapes() const { return shapes_; }

 private:
  VarId run_stage(Graph& g, int stage, VarId tokens) const;

  std::string prefix_;
  ExtractorConfig cfg_;
  int image_h_, image_w_;
  std::array<StageShape, 3> shapes_;

  Linear patch_embed_;
  LayerNorm embed_norm_;
  struct Merge {
    LayerNorm norm;
    Linear reduce;
    IndexMap fold;
  };
  std::array<Merge, 2> merges_;
  struct StageBlock {
    TransformerBlock block;
    IndexMap partition;
    IndexMap merge;
    int shift = 0;
    Tensor mask;  // empty when unshifted
    int groups = 0;
    int window_tokens = 0;
  };
  std::array<std::vector<StageBlock>, 3> stages_;
  IndexMap patchify_;
};

// Task-conditional fusion: every operand is aligned to the f3 grid by a
// learned 1x1 projection plus average-pool downsampling, then summed.
// RECONSTRUCT sums f1+f2+f3, SEGMENT sums f2+f3 (f1 is never read).
class FeatureSelector {
 public:
  FeatureSelector(ParamStore& store, std::string prefix,
                  const std::array<StageShape, 3>& shapes);

  VarId align(Graph& g, int level, VarId f) const;
  VarId select(Graph& g, TaskId task, VarId f1, VarId f2, VarId f3) const;

  FeatureMap align(int level, const FeatureMap& f) const;
  FeatureMap select(TaskId task, const FeatureMap& f1, const FeatureMap& f2,
                    const FeatureMap& f3) const;

  StageShape selected_shape() const { return {shapes_[2].h, shapes_[2].w, shapes_[2].c}; }

 private:
  std::array<StageShape, 3> shapes_;
  std::array<Linear, 3> proj_;
};

// Transmitter source KB: extraction + selection behind one object.
class TxKb {
 public:
  TxKb(ParamStore& store, std::string prefix, const ExtractorConfig& cfg, int image_h,
       int image_w);

  const HierarchicalExtractor& extractor() const { return extractor_; }
  const FeatureSelector& selector() const { return selector_; }

  VarId forward(Graph& g, VarId image, TaskId task) const;
  FeatureMap process(const Tensor& image, TaskId task) const;
  StageShape selected_shape() const { return selector_.selected_shape(); }

 private:
  HierarchicalExtractor extractor_;
  FeatureSelector selector_;
};

}  // namespace semcom
