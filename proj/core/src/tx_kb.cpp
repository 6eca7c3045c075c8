#include "semcom/tx_kb.hpp"

#include "semcom/common.hpp"

namespace semcom {

std::array<StageShape, 3> ExtractorConfig::validate(int image_h, int image_w) const {
  if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
  if (window_size < 1) throw ConfigError("window_size must be >= 1");
  if (embed_dim % attention_heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " not divisible by " +
                      std::to_string(attention_heads) + " attention heads");
  }
  for (int d : depths) {
    if (d < 1) throw ConfigError("stage depth must be >= 1");
  }
  if (shifted_windows && window_size % 2 != 0) {
    throw ConfigError("shifted windows require an even window_size");
  }
  if (image_h % patch_size != 0 || image_w % patch_size != 0) {
    throw ConfigError("image " + std::to_string(image_h) + "x" + std::to_string(image_w) +
                      " not divisible by patch_size " + std::to_string(patch_size));
  }
  std::array<StageShape, 3> shapes;
  int h = image_h / patch_size, w = image_w / patch_size, c = embed_dim;
  for (int s = 0; s < 3; ++s) {
    if (h % window_size != 0 || w % window_size != 0) {
      throw ConfigError("stage " + std::to_string(s + 1) + " grid " + std::to_string(h) +
                        "x" + std::to_string(w) + " not divisible by window_size " +
                        std::to_string(window_size));
    }
    shapes[static_cast<std::size_t>(s)] = {h, w, c};
    if (s < 2) {
      if (h % 2 != 0 || w % 2 != 0) {
        throw ConfigError("stage " + std::to_string(s + 1) + " grid " + std::to_string(h) +
                          "x" + std::to_string(w) + " cannot be patch-merged (odd side)");
      }
      h /= 2;
      w /= 2;
      c *= 2;
    }
  }
  return shapes;
}

HierarchicalExtractor::HierarchicalExtractor(ParamStore& store, std::string prefix,
                                             const ExtractorConfig& cfg, int image_h,
                                             int image_w)
    : prefix_(std::move(prefix)), cfg_(cfg), image_h_(image_h), image_w_(image_w) {
  shapes_ = cfg.validate(image_h, image_w);
  patchify_ = make_patchify(image_h, image_w, 3, cfg.patch_size);
  const int patch_dim = cfg.patch_size * cfg.patch_size * 3;
  patch_embed_ = Linear(store, prefix_ + ".patch_embed", patch_dim, cfg.embed_dim);
  embed_norm_ = LayerNorm(store, prefix_ + ".embed_norm", cfg.embed_dim);

  for (int s = 0; s < 3; ++s) {
    const StageShape& sh = shapes_[static_cast<std::size_t>(s)];
    const int heads = cfg.attention_heads << s;  // head dim constant across stages
    for (int d = 0; d < cfg.depths[static_cast<std::size_t>(s)]; ++d) {
      StageBlock blk;
      const std::string name =
          prefix_ + ".stage" + std::to_string(s + 1) + ".block" + std::to_string(d);
      blk.block = TransformerBlock(store, name, sh.c, heads, cfg.mlp_ratio);
      blk.shift = (cfg.shifted_windows && d % 2 == 1) ? cfg.window_size / 2 : 0;
      blk.partition = make_window_partition(sh.h, sh.w, sh.c, cfg.window_size, blk.shift);
      blk.merge = make_window_merge(sh.h, sh.w, sh.c, cfg.window_size, blk.shift);
      blk.groups = (sh.h / cfg.window_size) * (sh.w / cfg.window_size);
      blk.window_tokens = cfg.window_size * cfg.window_size;
      if (blk.shift > 0) {
        blk.mask = make_shift_mask(sh.h, sh.w, cfg.window_size, blk.shift, heads);
      }
      stages_[static_cast<std::size_t>(s)].push_back(std::move(blk));
    }
    if (s < 2) {
      Merge& m = merges_[static_cast<std::size_t>(s)];
      const std::string name = prefix_ + ".merge" + std::to_string(s + 1);
      m.fold = make_patchify(sh.h, sh.w, sh.c, 2);
      m.norm = LayerNorm(store, name + ".norm", 4 * sh.c);
      m.reduce = Linear(store, name + ".reduce", 4 * sh.c, 2 * sh.c);
    }
  }
}

VarId HierarchicalExtractor::run_stage(Graph& g, int stage, VarId tokens) const {
  const StageShape& sh = shapes_[static_cast<std::size_t>(stage)];
  for (const StageBlock& blk : stages_[static_cast<std::size_t>(stage)]) {
    VarId win = g.gather(tokens, blk.partition, {blk.groups * blk.window_tokens, sh.c});
    win = blk.block.forward(g, win, blk.groups, blk.window_tokens,
                            blk.mask.empty() ? nullptr : &blk.mask);
    tokens = g.gather(win, blk.merge, {sh.h * sh.w, sh.c});
  }
  return tokens;
}

HierarchicalExtractor::Features HierarchicalExtractor::forward(Graph& g, VarId image) const {
  const Tensor& img = g.value(image);
  if (img.ndim() != 3 || img.dim(0) != image_h_ || img.dim(1) != image_w_ ||
      img.dim(2) != 3) {
    throw Error("extractor built for " + std::to_string(image_h_) + "x" +
                std::to_string(image_w_) + "x3, got " + shape_str(img.dims()));
  }
  const int patch_dim = cfg_.patch_size * cfg_.patch_size * 3;
  const int n1 = shapes_[0].h * shapes_[0].w;
  VarId tokens = g.gather(image, patchify_, {n1, patch_dim});
  tokens = embed_norm_.forward(g, patch_embed_.forward(g, tokens));

  Features out{};
  tokens = run_stage(g, 0, tokens);
  out.f1 = g.reshape(tokens, {shapes_[0].h, shapes_[0].w, shapes_[0].c});
  for (int s = 0; s < 2; ++s) {
    const Merge& m = merges_[static_cast<std::size_t>(s)];
    const StageShape& next = shapes_[static_cast<std::size_t>(s + 1)];
    VarId folded = g.gather(tokens, m.fold, {next.h * next.w, 4 * shapes_[static_cast<std::size_t>(s)].c});
    tokens = m.reduce.forward(g, m.norm.forward(g, folded));
    tokens = run_stage(g, s + 1, tokens);
    VarId grid = g.reshape(tokens, {next.h, next.w, next.c});
    (s == 0 ? out.f2 : out.f3) = grid;
  }
  return out;
}

std::array<FeatureMap, 3> HierarchicalExtractor::extract(const Tensor& image) const {
  Graph g;
  Features f = forward(g, g.constant(image));
  return {FeatureMap{g.value(f.f1), FeatureLevel::low},
          FeatureMap{g.value(f.f2), FeatureLevel::mid},
          FeatureMap{g.value(f.f3), FeatureLevel::high}};
}

FeatureSelector::FeatureSelector(ParamStore& store, std::string prefix,
                                 const std::array<StageShape, 3>& shapes)
    : shapes_(shapes) {
  for (int level = 0; level < 3; ++level) {
    proj_[static_cast<std::size_t>(level)] =
        Linear(store, prefix + ".proj" + std::to_string(level + 1),
               shapes[static_cast<std::size_t>(level)].c, shapes[2].c);
  }
}

VarId FeatureSelector::align(Graph& g, int level, VarId f) const {
  if (level < 0 || level > 2) throw Error("feature level out of range");
  const StageShape& sh = shapes_[static_cast<std::size_t>(level)];
  const Tensor& v = g.value(f);
  if (v.ndim() != 3 || v.dim(0) != sh.h || v.dim(1) != sh.w || v.dim(2) != sh.c) {
    throw Error("level " + std::to_string(level + 1) + " feature has shape " +
                shape_str(v.dims()) + ", expected " + std::to_string(sh.h) + "x" +
                std::to_string(sh.w) + "x" + std::to_string(sh.c));
  }
  VarId tokens = g.reshape(f, {sh.h * sh.w, sh.c});
  VarId projected = proj_[static_cast<std::size_t>(level)].forward(g, tokens);
  VarId grid = g.reshape(projected, {sh.h, sh.w, shapes_[2].c});
  const int factor = sh.h / shapes_[2].h;
  if (factor > 1) grid = g.avg_pool2d(grid, factor);
  return grid;
}

VarId FeatureSelector::select(Graph& g, TaskId task, VarId f1, VarId f2, VarId f3) const {
  switch (task) {
    case TaskId::RECONSTRUCT:
      return g.add(g.add(align(g, 0, f1), align(g, 1, f2)), align(g, 2, f3));
    case TaskId::SEGMENT:
      return g.add(align(g, 1, f2), align(g, 2, f3));
  }
  throw Error("unknown task instruction id " +
              std::to_string(static_cast<int>(task)));
}

namespace {

void check_level(const FeatureMap& f, FeatureLevel expect, const char* which) {
  if (f.level != expect) {
    throw Error(std::string("feature map passed as ") + which + " carries the wrong level tag");
  }
}

}  // namespace

FeatureMap FeatureSelector::align(int level, const FeatureMap& f) const {
  Graph g;
  VarId out = align(g, level, g.constant(f.grid));
  return {g.value(out), f.level};
}

FeatureMap FeatureSelector::select(TaskId task, const FeatureMap& f1, const FeatureMap& f2,
                                   const FeatureMap& f3) const {
  check_level(f2, FeatureLevel::mid, "f2");
  check_level(f3, FeatureLevel::high, "f3");
  Graph g;
  VarId out;
  if (task == TaskId::SEGMENT) {
    // f1 is not touched on the segmentation path
    out = g.add(align(g, 1, g.constant(f2.grid)), align(g, 2, g.constant(f3.grid)));
  } else {
    check_level(f1, FeatureLevel::low, "f1");
    out = select(g, task, g.constant(f1.grid), g.constant(f2.grid), g.constant(f3.grid));
  }
  return {g.value(out), FeatureLevel::selected};
}

TxKb::TxKb(ParamStore& store, std::string prefix, const ExtractorConfig& cfg, int image_h,
           int image_w)
    : extractor_(store, prefix + ".extract", cfg, image_h, image_w),
      selector_(store, prefix + ".select", extractor_.stage_shapes()) {}

VarId TxKb::forward(Graph& g, VarId image, TaskId task) const {
  auto f = extractor_.forward(g, image);
  if (task == TaskId::SEGMENT) {
    return g.add(selector_.align(g, 1, f.f2), selector_.align(g, 2, f.f3));
  }
  return selector_.select(g, task, f.f1, f.f2, f.f3);
}

FeatureMap TxKb::process(const Tensor& image, TaskId task) const {
  auto maps = extractor_.extract(image);
  return selector_.select(task, maps[0], maps[1], maps[2]);
}

}  // namespace semcom
