#include "semcom/rx_kb.hpp"

#include "semcom/common.hpp"

namespace semcom {

void RxKbConfig::validate() const {
  if (channels < 1) throw ConfigError("receiver KB channel width must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("receiver KB kernel must be odd");
}

RxKb::RxKb(ParamStore& store, std::string prefix, const RxKbConfig& cfg, SignalLayout layout)
    : cfg_(cfg), layout_(layout) {
  cfg_.validate();
  const int pad = cfg.kernel / 2;
  entry_ = Conv2d(store, prefix + ".entry", cfg.kernel, layout.channels, cfg.channels, 1, pad);
  block1_ = ResidualBlock(store, prefix + ".block1", cfg.channels, cfg.kernel);
  block2_ = ResidualBlock(store, prefix + ".block2", cfg.channels, cfg.kernel);
}

RxKb::Features RxKb::generate(Graph& g, VarId y_real) const {
  const Tensor& y = g.value(y_real);
  if (y.size() != layout_.real_count()) {
    throw Error("received signal has " + std::to_string(y.size() / 2) + " symbols; layout " +
                std::to_string(layout_.grid_h) + "x" + std::to_string(layout_.grid_w) + "x" +
                std::to_string(layout_.channels) + " expects " +
                std::to_string(layout_.symbol_count()));
  }
  VarId grid = g.reshape(y_real, {layout_.grid_h, layout_.grid_w, layout_.channels});
  Features f{};
  f.entry = entry_.forward(g, grid);
  f.g1 = block1_.forward(g, f.entry);
  f.g2 = block2_.forward(g, f.g1);
  return f;
}

VarId RxKb::select(Graph& g, TaskId task, VarId g1, VarId g2) const {
  switch (task) {
    case TaskId::RECONSTRUCT:
      return g.add(g1, g2);
    case TaskId::SEGMENT:
      return g1;  // block-2 output is never read
  }
  throw Error("unknown task instruction id " + std::to_string(static_cast<int>(task)));
}

RxKb::FeaturePair RxKb::generate_features(const ComplexSignal& y) const {
  const std::vector<double> reals = complex_to_real(y);
  Graph g;
  Features f = generate(g, g.constant(Tensor({static_cast<int>(reals.size())}, reals)));
  FeaturePair out;
  out.entry = g.value(f.entry);
  out.g1 = {g.value(f.g1), 1, false};
  out.g2 = {g.value(f.g2), 2, false};
  return out;
}

RxFeature RxKb::select_rx_features(TaskId task, const RxFeature& g1, const RxFeature& g2) {
  if (task == TaskId::SEGMENT) {
    RxFeature out = g1;  // bit-identical pass-through
    out.selected = true;
    return out;
  }
  if (task != TaskId::RECONSTRUCT) {
    throw Error("unknown task instruction id " + std::to_string(static_cast<int>(task)));
  }
  if (!g1.grid.same_shape(g2.grid)) {
    throw Error("rx features g1 " + shape_str(g1.grid.dims()) + " and g2 " +
                shape_str(g2.grid.dims()) + " disagree");
  }
  RxFeature out;
  out.grid = Tensor(g1.grid.dims());
  for (std::int64_t i = 0; i < out.grid.size(); ++i) out.grid[i] = g1.grid[i] + g2.grid[i];
  out.block_index = 0;
  out.selected = true;
  return out;
}

}  // namespace semcom
