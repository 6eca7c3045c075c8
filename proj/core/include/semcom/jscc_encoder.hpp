#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/nn.hpp"
#include "semcom/tx_kb.hpp"

namespace semcom {

inline constexpr double kBandwidthBoundBits = 20.0 * 1024.0;

// Shape of the latent grid a received signal folds back into.
struct SignalLayout {
  int grid_h = 0;
  int grid_w = 0;
  int channels = 0;

  std::int64_t real_count() const {
    return static_cast<std::int64_t>(grid_h) * grid_w * channels;
  }
  std::int64_t symbol_count() const { return real_count() / 2; }
};

struct EncoderConfig {
  int hidden_dim = 128;
  int kernel = 3;
  std::vector<int> strides = {2, 2, 2, 2};  // downsample schedule to the target grid
  int out_channels = 16;                    // must be even for complex pairing
  double bits_per_symbol = 8.0;

  void validate() const;
};

struct BandwidthReport {
  std::int64_t symbol_count = 0;
  double bits = 0.0;
  bool within_bound = false;  // the 20 Kbit comparison budget
};

BandwidthReport bandwidth_bits(const SignalLayout& layout, double bits_per_symbol);

// Unified task-agnostic encoder: concatenates the image with the selected
// feature (nearest-upsampled to the image grid), passes a residual stem,
// downsamples to the target grid and emits a power-normalized signal.
class JsccEncoder {
 public:
  JsccEncoder(ParamStore& store, std::string prefix, const EncoderConfig& cfg,
              int image_h, int image_w, StageShape feature_shape);

  // returns the flat real vector [2 * symbols], already power-normalized
  VarId forward(Graph& g, VarId image, VarId selected_feature) const;

  ComplexSignal encode(const Tensor& image, const FeatureMap& selected) const;

  const SignalLayout& layout() const { return layout_; }
  const EncoderConfig& config() const { return cfg_; }
  BandwidthReport bandwidth() const { return bandwidth_bits(layout_, cfg_.bits_per_symbol); }

 private:
  EncoderConfig cfg_;
  int image_h_, image_w_;
  StageShape feature_shape_;
  SignalLayout layout_;
  IndexMap feature_upsample_;
  Conv2d stem_;
  ResidualBlock res_;
  std::vector<Conv2d> down_;
  Conv2d head_;
};

}  // namespace semcom
