#include "semcom/jscc_encoder.hpp"

#include "semcom/common.hpp"

namespace semcom {

void EncoderConfig::validate() const {
  if (hidden_dim < 1) throw ConfigError("encoder hidden_dim must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("encoder kernel must be odd");
  if (out_channels < 2 || out_channels % 2 != 0) {
    throw ConfigError("encoder out_channels must be even and >= 2 for complex pairing");
  }
  for (int s : strides) {
    if (s < 2) throw ConfigError("downsample strides must be >= 2");
  }
  if (!(bits_per_symbol > 0.0)) throw ConfigError("bits_per_symbol must be positive");
}

BandwidthReport bandwidth_bits(const SignalLayout& layout, double bits_per_symbol) {
  if (!(bits_per_symbol > 0.0)) throw ConfigError("bits_per_symbol must be positive");
  BandwidthReport r;
  r.symbol_count = layout.symbol_count();
  if (r.symbol_count < 1) throw ConfigError("signal layout yields zero symbols");
  r.bits = static_cast<double>(r.symbol_count) * bits_per_symbol;
  r.within_bound = r.bits <= kBandwidthBoundBits;
  return r;
}

JsccEncoder::JsccEncoder(ParamStore& store, std::string prefix, const EncoderConfig& cfg,
                         int image_h, int image_w, StageShape feature_shape)
    : cfg_(cfg), image_h_(image_h), image_w_(image_w), feature_shape_(feature_shape) {
  cfg_.validate();
  if (feature_shape.h <= 0 || image_h % feature_shape.h != 0 ||
      image_w % feature_shape.w != 0) {
    throw ConfigError("selected feature grid does not tile the image grid");
  }
  const int up = image_h / feature_shape.h;
  if (image_w / feature_shape.w != up) {
    throw ConfigError("selected feature grid aspect does not match the image");
  }
  feature_upsample_ = make_upsample_nearest(feature_shape.h, feature_shape.w,
                                            feature_shape.c, up);

  int side_h = image_h, side_w = image_w;
  for (int s : cfg_.strides) {
    if (side_h % s != 0 || side_w % s != 0) {
      throw ConfigError("stride schedule does not divide the image size");
    }
    side_h /= s;
    side_w /= s;
  }
  layout_ = {side_h, side_w, cfg_.out_channels};
  if (layout_.real_count() % 2 != 0 || layout_.symbol_count() < 1) {
    throw ConfigError("encoder output does not form a non-empty complex signal");
  }

  const int in_ch = 3 + feature_shape.c;
  const int pad = cfg_.kernel / 2;
  stem_ = Conv2d(store, prefix + ".stem", cfg_.kernel, in_ch, cfg_.hidden_dim, 1, pad);
  res_ = ResidualBlock(store, prefix + ".res", cfg_.hidden_dim, cfg_.kernel);
  for (std::size_t i = 0; i < cfg_.strides.size(); ++i) {
    down_.push_back(Conv2d(store, prefix + ".down" + std::to_string(i), cfg_.kernel,
                           cfg_.hidden_dim, cfg_.hidden_dim, cfg_.strides[i], pad));
  }
  head_ = Conv2d(store, prefix + ".head", 1, cfg_.hidden_dim, cfg_.out_channels, 1, 0);
}

VarId JsccEncoder::forward(Graph& g, VarId image, VarId selected_feature) const {
  const Tensor& img = g.value(image);
  if (img.ndim() != 3 || img.dim(0) != image_h_ || img.dim(1) != image_w_ || img.dim(2) != 3) {
    throw Error("encoder built for " + std::to_string(image_h_) + "x" +
                std::to_string(image_w_) + "x3, got " + shape_str(img.dims()));
  }
  const Tensor& f = g.value(selected_feature);
  if (f.ndim() != 3 || f.dim(0) != feature_shape_.h || f.dim(1) != feature_shape_.w ||
      f.dim(2) != feature_shape_.c) {
    throw Error("selected feature has shape " + shape_str(f.dims()) + ", encoder expects " +
                std::to_string(feature_shape_.h) + "x" + std::to_string(feature_shape_.w) +
                "x" + std::to_string(feature_shape_.c));
  }
  VarId f_up = g.gather(selected_feature, feature_upsample_,
                        {image_h_, image_w_, feature_shape_.c});
  VarId x = g.concat_last(image, f_up);
  x = g.gelu(stem_.forward(g, x));
  x = res_.forward(g, x);
  for (const auto& d : down_) x = g.gelu(d.forward(g, x));
  x = head_.forward(g, x);
  VarId flat = g.reshape(x, {static_cast<int>(layout_.real_count())});
  return g.power_normalize(flat);
}

ComplexSignal JsccEncoder::encode(const Tensor& image, const FeatureMap& selected) const {
  if (selected.level != FeatureLevel::selected) {
    throw Error("encoder expects a task-selected feature map");
  }
  Graph g;
  VarId out = forward(g, g.constant(image), g.constant(selected.grid));
  const Tensor& v = g.value(out);
  return real_to_complex(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace semcom
