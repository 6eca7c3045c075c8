#include "semcom/nn.hpp"

#include <cmath>

#include "semcom/common.hpp"

namespace semcom {

Linear::Linear(ParamStore& store, std::string n, int in, int out, double gain)
    : name(std::move(n)) {
  w = &store.create(name + ".w", {in, out}, init_scaled_xavier(in, out, gain));
  b = &store.create(name + ".b", {out}, init_zeros());
}

VarId Linear::forward(Graph& g, VarId x) const {
  return g.linear(x, g.param(name + ".w", *w), g.param(name + ".b", *b));
}

Conv2d::Conv2d(ParamStore& store, std::string n, int kernel, int in, int out, int s,
               int p, double gain)
    : name(std::move(n)), stride(s), pad(p) {
  const int fan_in = kernel * kernel * in;
  const int fan_out = kernel * kernel * out;
  w = &store.create(name + ".w", {kernel, kernel, in, out},
                    init_scaled_xavier(fan_in, fan_out, gain));
  b = &store.create(name + ".b", {out}, init_zeros());
}

VarId Conv2d::forward(Graph& g, VarId x) const {
  return g.conv2d(x, g.param(name + ".w", *w), g.param(name + ".b", *b), stride, pad);
}

LayerNorm::LayerNorm(ParamStore& store, std::string n, int dim) : name(std::move(n)) {
  gamma = &store.create(name + ".gamma", {dim}, init_constant(1.0));
  beta = &store.create(name + ".beta", {dim}, init_zeros());
}

VarId LayerNorm::forward(Graph& g, VarId x) const {
  return g.layer_norm(x, g.param(name + ".gamma", *gamma), g.param(name + ".beta", *beta));
}

ResidualBlock::ResidualBlock(ParamStore& store, std::string name, int channels, int kernel)
    : conv1(store, name + ".conv1", kernel, channels, channels, 1, kernel / 2),
      conv2(store, name + ".conv2", kernel, channels, channels, 1, kernel / 2) {}

VarId ResidualBlock::forward(Graph& g, VarId x, double dropout_rate, Rng* rng) const {
  VarId h = g.gelu(conv1.forward(g, x));
  if (dropout_rate > 0.0 && rng != nullptr) h = g.dropout(h, dropout_rate, *rng);
  h = conv2.forward(g, h);
  return g.add(x, h);
}

Mlp::Mlp(ParamStore& store, std::string name, int dim, double ratio)
    : fc1(store, name + ".fc1", dim, static_cast<int>(dim * ratio)),
      fc2(store, name + ".fc2", static_cast<int>(dim * ratio), dim) {}

VarId Mlp::forward(Graph& g, VarId x) const {
  return fc2.forward(g, g.gelu(fc1.forward(g, x)));
}

MultiheadAttention::MultiheadAttention(ParamStore& store, std::string name, int d, int h)
    : q(store, name + ".q", d, d),
      k(store, name + ".k", d, d),
      v(store, name + ".v", d, d),
      proj(store, name + ".proj", d, d),
      heads(h),
      dim(d) {
  if (d % h != 0) {
    throw ConfigError("attention dim " + std::to_string(d) + " not divisible by " +
                      std::to_string(h) + " heads");
  }
}

VarId MultiheadAttention::forward(Graph& g, VarId tokens, int groups,
                                  int tokens_per_group, const Tensor* mask) const {
  const int hd = dim / heads;
  const IndexMap split = make_head_split(groups, tokens_per_group, heads, hd);
  const IndexMap merge = make_head_merge(groups, tokens_per_group, heads, hd);
  const std::vector<int> split_dims{groups * heads, tokens_per_group, hd};

  VarId qh = g.gather(q.forward(g, tokens), split, split_dims);
  VarId kh = g.gather(k.forward(g, tokens), split, split_dims);
  VarId vh = g.gather(v.forward(g, tokens), split, split_dims);

  VarId scores = g.scale(g.batched_matmul(qh, kh, false, true), 1.0 / std::sqrt(hd));
  if (mask != nullptr) scores = g.add_const(scores, *mask);
  VarId attn = g.softmax_last(scores);
  VarId ctx = g.batched_matmul(attn, vh, false, false);
  VarId merged = g.gather(ctx, merge, {groups * tokens_per_group, dim});
  return proj.forward(g, merged);
}

TransformerBlock::TransformerBlock(ParamStore& store, std::string name, int dim, int heads,
                                   double mlp_ratio)
    : norm1(store, name + ".norm1", dim),
      norm2(store, name + ".norm2", dim),
      attn(store, name + ".attn", dim, heads),
      mlp(store, name + ".mlp", dim, mlp_ratio) {}

VarId TransformerBlock::forward(Graph& g, VarId tokens, int groups, int tokens_per_group,
                                const Tensor* mask) const {
  VarId x = g.add(tokens, attn.forward(g, norm1.forward(g, tokens), groups,
                                       tokens_per_group, mask));
  return g.add(x, mlp.forward(g, norm2.forward(g, x)));
}

IndexMap make_patchify(int h, int w, int c, int p) {
  if (h % p != 0 || w % p != 0) {
    throw ConfigError("patch size " + std::to_string(p) + " does not tile " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(static_cast<std::size_t>(h) * w * c);
  for (int py = 0; py < h / p; ++py)
    for (int px = 0; px < w / p; ++px)
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx)
          for (int ch = 0; ch < c; ++ch) {
            idx->push_back(
                (static_cast<std::int64_t>(py * p + dy) * w + (px * p + dx)) * c + ch);
          }
  return idx;
}

IndexMap make_unpatchify(int h, int w, int c, int p) {
  const IndexMap fwd = make_patchify(h, w, c, p);
  auto idx = std::make_shared<std::vector<std::int64_t>>(fwd->size());
  for (std::size_t i = 0; i < fwd->size(); ++i) {
    (*idx)[static_cast<std::size_t>((*fwd)[i])] = static_cast<std::int64_t>(i);
  }
  return idx;
}

IndexMap make_window_partition(int h, int w, int c, int win, int shift) {
  if (h % win != 0 || w % win != 0) {
    throw ConfigError("window " + std::to_string(win) + " does not tile grid " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(static_cast<std::size_t>(h) * w * c);
  for (int wy = 0; wy < h / win; ++wy)
    for (int wx = 0; wx < w / win; ++wx)
      for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
          const int sy = (wy * win + dy + shift + h) % h;  // cyclic shift
          const int sx = (wx * win + dx + shift + w) % w;
          for (int ch = 0; ch < c; ++ch) {
            idx->push_back((static_cast<std::int64_t>(sy) * w + sx) * c + ch);
          }
        }
  return idx;
}

IndexMap make_window_merge(int h, int w, int c, int win, int shift) {
  const IndexMap fwd = make_window_partition(h, w, c, win, shift);
  auto idx = std::make_shared<std::vector<std::int64_t>>(fwd->size());
  for (std::size_t i = 0; i < fwd->size(); ++i) {
    (*idx)[static_cast<std::size_t>((*fwd)[i])] = static_cast<std::int64_t>(i);
  }
  return idx;
}

IndexMap make_head_split(int groups, int tokens, int heads, int head_dim) {
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(static_cast<std::size_t>(groups) * tokens * heads * head_dim);
  const int dim = heads * head_dim;
  for (int gidx = 0; gidx < groups; ++gidx)
    for (int hh = 0; hh < heads; ++hh)
      for (int t = 0; t < tokens; ++t)
        for (int d = 0; d < head_dim; ++d) {
          idx->push_back((static_cast<std::int64_t>(gidx) * tokens + t) * dim +
                         hh * head_dim + d);
        }
  return idx;
}

IndexMap make_head_merge(int groups, int tokens, int heads, int head_dim) {
  const IndexMap fwd = make_head_split(groups, tokens, heads, head_dim);
  auto idx = std::make_shared<std::vector<std::int64_t>>(fwd->size());
  for (std::size_t i = 0; i < fwd->size(); ++i) {
    (*idx)[static_cast<std::size_t>((*fwd)[i])] = static_cast<std::int64_t>(i);
  }
  return idx;
}

IndexMap make_upsample_nearest(int h, int w, int c, int f) {
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(static_cast<std::size_t>(h) * f * w * f * c);
  for (int y = 0; y < h * f; ++y)
    for (int x = 0; x < w * f; ++x)
      for (int ch = 0; ch < c; ++ch) {
        idx->push_back((static_cast<std::int64_t>(y / f) * w + x / f) * c + ch);
      }
  return idx;
}

IndexMap make_depth_to_space(int h, int w, int c, int f) {
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(static_cast<std::size_t>(h) * f * w * f * c);
  for (int y = 0; y < h * f; ++y)
    for (int x = 0; x < w * f; ++x)
      for (int ch = 0; ch < c; ++ch) {
        const int sy = y / f, sx = x / f;
        const int sub = (y % f) * f + (x % f);
        idx->push_back((static_cast<std::int64_t>(sy) * w + sx) * (f * f * c) + sub * c + ch);
      }
  return idx;
}

void make_bilinear_taps(int in_h, int in_w, int c, int out_h, int out_w, IndexMap& idx,
                        CoefMap& coef) {
  auto ix = std::make_shared<std::vector<std::int64_t>>();
  auto cf = std::make_shared<std::vector<double>>();
  const std::size_t n = static_cast<std::size_t>(out_h) * out_w * c * 4;
  ix->reserve(n);
  cf->reserve(n);
  const double sy = static_cast<double>(in_h) / out_h;
  const double sx = static_cast<double>(in_w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        ix->push_back((static_cast<std::int64_t>(y0) * in_w + x0) * c + ch);
        cf->push_back((1 - wy) * (1 - wx));
        ix->push_back((static_cast<std::int64_t>(y0) * in_w + x1) * c + ch);
        cf->push_back((1 - wy) * wx);
        ix->push_back((static_cast<std::int64_t>(y1) * in_w + x0) * c + ch);
        cf->push_back(wy * (1 - wx));
        ix->push_back((static_cast<std::int64_t>(y1) * in_w + x1) * c + ch);
        cf->push_back(wy * wx);
      }
    }
  }
  idx = ix;
  coef = cf;
}

Tensor make_shift_mask(int h, int w, int win, int shift, int heads) {
  // region id changes where the cyclic shift wraps rows/columns
  const int nw = (h / win) * (w / win);
  const int t = win * win;
  Tensor mask({nw * heads, t, t});
  std::vector<int> region(static_cast<std::size_t>(h) * w);
  auto region_of = [&](int y, int x) {
    const int ry = (y < h - shift) ? 0 : 1;
    const int rx = (x < w - shift) ? 0 : 1;
    return ry * 2 + rx;
  };
  int widx = 0;
  for (int wy = 0; wy < h / win; ++wy)
    for (int wx = 0; wx < w / win; ++wx, ++widx) {
      std::vector<int> ids(static_cast<std::size_t>(t));
      for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
          const int sy = (wy * win + dy + shift) % h;
          const int sx = (wx * win + dx + shift) % w;
          ids[static_cast<std::size_t>(dy * win + dx)] = region_of(sy, sx);
        }
      for (int hh = 0; hh < heads; ++hh) {
        double* m = mask.data() + (static_cast<std::int64_t>(widx) * heads + hh) * t * t;
        for (int i = 0; i < t; ++i)
          for (int j = 0; j < t; ++j) {
            m[i * t + j] = (ids[static_cast<std::size_t>(i)] ==
                            ids[static_cast<std::size_t>(j)])
                               ? 0.0
                               : -1e9;
          }
      }
    }
  return mask;
}

Tensor sinusoidal_positions(int count, int dim) {
  Tensor t({count, dim});
  for (int p = 0; p < count; ++p) {
    for (int i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -2.0 * (i / 2) / dim);
      t[static_cast<std::int64_t>(p) * dim + i] =
          (i % 2 == 0) ? std::sin(p * freq) : std::cos(p * freq);
    }
  }
  return t;
}

Tensor sinusoidal_time(int step, int count, int dim) {
  Tensor row = sinusoidal_positions(step + 1, dim);
  Tensor out({count, dim});
  for (int p = 0; p < count; ++p) {
    std::copy_n(row.data() + static_cast<std::int64_t>(step) * dim, dim,
                out.data() + static_cast<std::int64_t>(p) * dim);
  }
  return out;
}

}  // namespace semcom
