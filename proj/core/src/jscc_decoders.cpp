#include "semcom/jscc_decoders.hpp"

#include <cmath>

#include "semcom/common.hpp"

namespace semcom {

void ReconDecoderConfig::validate() const {
  if (depth < 1) throw ConfigError("reconstruction decoder depth must be >= 1");
  if (refine_steps < 1) throw ConfigError("refinement step count K must be >= 1");
  if (patch_size < 1) throw ConfigError("decoder patch size must be >= 1");
  if (embed_dim % attention_heads != 0) {
    throw ConfigError("decoder embed_dim not divisible by attention heads");
  }
  if (up_channels < 1) throw ConfigError("decoder up_channels must be >= 1");
}

ReconDecoder::ReconDecoder(ParamStore& store, std::string prefix,
                           const ReconDecoderConfig& cfg, SignalLayout layout, int image_h,
                           int image_w, int feature_channels)
    : cfg_(cfg),
      layout_(layout),
      image_h_(image_h),
      image_w_(image_w),
      feature_channels_(feature_channels) {
  cfg_.validate();
  if (layout.grid_h % cfg.patch_size != 0 || layout.grid_w % cfg.patch_size != 0) {
    throw ConfigError("decoder patch size does not tile the signal grid");
  }
  token_h_ = layout.grid_h / cfg.patch_size;
  token_w_ = layout.grid_w / cfg.patch_size;
  if (image_h % layout.grid_h != 0 || image_w % layout.grid_w != 0 ||
      image_h / layout.grid_h != image_w / layout.grid_w) {
    throw ConfigError("signal grid does not tile the image uniformly");
  }
  up_factor_ = image_h / layout.grid_h;
  const int fused_c = layout.channels + feature_channels;
  patchify_ = make_patchify(layout.grid_h, layout.grid_w, fused_c, cfg.patch_size);
  unpatchify_ = make_unpatchify(layout.grid_h, layout.grid_w, cfg.up_channels, cfg.patch_size);
  make_bilinear_taps(layout.grid_h, layout.grid_w, cfg.up_channels, image_h, image_w,
                     head_taps_idx_, head_taps_coef_);
  pos_embed_ = sinusoidal_positions(token_h_ * token_w_, cfg.embed_dim);

  const int patch_dim = cfg.patch_size * cfg.patch_size * fused_c;
  token_embed_ = Linear(store, prefix + ".embed", patch_dim, cfg.embed_dim);
  for (int d = 0; d < cfg.depth; ++d) {
    blocks_.push_back(TransformerBlock(store, prefix + ".block" + std::to_string(d),
                                       cfg.embed_dim, cfg.attention_heads, 4.0));
  }
  const int unpatch_dim = cfg.patch_size * cfg.patch_size * cfg.up_channels;
  unembed_ = Linear(store, prefix + ".unembed", cfg.embed_dim, unpatch_dim);
  res_ = ResidualBlock(store, prefix + ".res", cfg.up_channels, 3);
  // near-zero head keeps the initial output at mid-gray inside the clamp
  head_ = Conv2d(store, prefix + ".head", 3, cfg.up_channels, 3, 1, 1, 0.05);
}

VarId ReconDecoder::forward(Graph& g, VarId y_real, VarId f, int steps,
                            VarId* pre_clamp) const {
  const int K = steps > 0 ? steps : cfg_.refine_steps;
  const Tensor& y = g.value(y_real);
  if (y.size() != layout_.real_count()) {
    throw Error("decoder: signal length " + std::to_string(y.size()) +
                " does not match layout (" + std::to_string(layout_.real_count()) + ")");
  }
  const Tensor& fv = g.value(f);
  if (fv.ndim() != 3 || fv.dim(0) != layout_.grid_h || fv.dim(1) != layout_.grid_w ||
      fv.dim(2) != feature_channels_) {
    throw Error("decoder: rx feature shape " + shape_str(fv.dims()) + " unexpected");
  }

  VarId grid = g.reshape(y_real, {layout_.grid_h, layout_.grid_w, layout_.channels});
  VarId fused = g.concat_last(grid, f);
  const int tokens = token_h_ * token_w_;
  const int fused_c = layout_.channels + feature_channels_;
  const int patch_dim = cfg_.patch_size * cfg_.patch_size * fused_c;
  VarId x = token_embed_.forward(g, g.gather(fused, patchify_, {tokens, patch_dim}));

  for (int k = 0; k < K; ++k) {
    x = g.add_const(x, sinusoidal_time(k, tokens, cfg_.embed_dim));
    x = g.add_const(x, pos_embed_);
    for (const auto& blk : blocks_) x = blk.forward(g, x, 1, tokens);
  }

  VarId unpatched = unembed_.forward(g, x);
  VarId up_grid = g.gather(unpatched, unpatchify_,
                           {layout_.grid_h, layout_.grid_w, cfg_.up_channels});
  VarId full = g.linear_combine(up_grid, head_taps_idx_, head_taps_coef_, 4,
                                {image_h_, image_w_, cfg_.up_channels});
  full = res_.forward(g, full);
  VarId rgb = head_.forward(g, full);
  rgb = g.add_const(rgb, Tensor::full({image_h_, image_w_, 3}, 0.5));
  if (pre_clamp != nullptr) *pre_clamp = rgb;
  return g.clamp01(rgb);
}

Tensor ReconDecoder::decode(const ComplexSignal& y, const RxFeature& f, int steps) const {
  const std::vector<double> reals = complex_to_real(y);
  Graph g;
  VarId out = forward(g, g.constant(Tensor({static_cast<int>(reals.size())}, reals)),
                      g.constant(f.grid), steps);
  return g.value(out);
}

void SegDecoderConfig::validate() const {
  if (channels < 1) throw ConfigError("segmentation decoder channels must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("segmentation kernel must be odd");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (num_classes < 2) throw ConfigError("segmentation needs at least 2 classes");
}

SegDecoder::SegDecoder(ParamStore& store, std::string prefix, const SegDecoderConfig& cfg,
                       SignalLayout layout, int image_h, int image_w, int feature_channels)
    : cfg_(cfg),
      layout_(layout),
      image_h_(image_h),
      image_w_(image_w),
      feature_channels_(feature_channels) {
  cfg_.validate();
  make_bilinear_taps(layout.grid_h, layout.grid_w, cfg.channels, image_h, image_w, up_idx_,
                     up_coef_);
  const int pad = cfg.kernel / 2;
  entry_ = Conv2d(store, prefix + ".entry", cfg.kernel, layout.channels + feature_channels,
                  cfg.channels, 1, pad);
  block1_ = ResidualBlock(store, prefix + ".block1", cfg.channels, cfg.kernel);
  block2_ = ResidualBlock(store, prefix + ".block2", cfg.channels, cfg.kernel);
  head_ = Conv2d(store, prefix + ".head", 1, cfg.channels, cfg.num_classes, 1, 0);
}

VarId SegDecoder::forward(Graph& g, VarId y_real, VarId f_selected, bool training,
                          Rng* dropout_rng) const {
  const Tensor& y = g.value(y_real);
  if (y.size() != layout_.real_count()) {
    throw Error("segmentation decoder: signal length " + std::to_string(y.size()) +
                " does not match layout");
  }
  const Tensor& fv = g.value(f_selected);
  if (fv.ndim() != 3 || fv.dim(0) != layout_.grid_h || fv.dim(1) != layout_.grid_w ||
      fv.dim(2) != feature_channels_) {
    throw Error("segmentation decoder: rx feature shape " + shape_str(fv.dims()) +
                " unexpected");
  }
  VarId grid = g.reshape(y_real, {layout_.grid_h, layout_.grid_w, layout_.channels});
  VarId x = g.gelu(entry_.forward(g, g.concat_last(grid, f_selected)));
  const double rate = training ? cfg_.dropout : 0.0;
  x = block1_.forward(g, x, rate, dropout_rng);
  x = block2_.forward(g, x, rate, dropout_rng);
  VarId up = g.linear_combine(x, up_idx_, up_coef_, 4, {image_h_, image_w_, cfg_.channels});
  return head_.forward(g, up);
}

Tensor SegDecoder::decode(const ComplexSignal& y, const RxFeature& f) const {
  if (!f.selected) throw Error("segmentation decoder expects the selected rx feature");
  const std::vector<double> reals = complex_to_real(y);
  Graph g;
  VarId out = forward(g, g.constant(Tensor({static_cast<int>(reals.size())}, reals)),
                      g.constant(f.grid), false, nullptr);
  return g.value(out);
}

double loss_segmentation(const Tensor& logits, const SegmentationMask& mask) {
  if (logits.ndim() != 3) throw Error("loss_segmentation: logits must be [H,W,C]");
  const int H = logits.dim(0), W = logits.dim(1), C = logits.dim(2);
  if (mask.height != H || mask.width != W) {
    throw Error("loss_segmentation: mask " + std::to_string(mask.height) + "x" +
                std::to_string(mask.width) + " does not match logits " + std::to_string(H) +
                "x" + std::to_string(W));
  }
  double total = 0.0;
  std::int64_t valid = 0;
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      const int y = mask.at(i, j);
      if (y == kIgnoreLabel) continue;
      if (y < 0 || y >= C) {
        throw DataError("segmentation label " + std::to_string(y) + " outside [0," +
                        std::to_string(C - 1) + "]");
      }
      double m = logits.at(i, j, 0);
      for (int c = 1; c < C; ++c) m = std::max(m, logits.at(i, j, c));
      double z = 0.0;
      for (int c = 0; c < C; ++c) z += std::exp(logits.at(i, j, c) - m);
      total += m + std::log(z) - logits.at(i, j, y);
      ++valid;
    }
  }
  if (valid == 0) throw DataError("loss_segmentation: every pixel carries the ignore label");
  return total / static_cast<double>(valid);
}

}  // namespace semcom
