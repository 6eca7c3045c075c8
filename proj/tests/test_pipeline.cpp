#include <doctest.h>

#include <cmath>

#include "semcom/common.hpp"
#include "semcom/pipeline.hpp"
#include "test_util.hpp"

using namespace semcom;
using test::random_tensor;

namespace {

ExperimentConfig toy_config() {
  ExperimentConfig cfg;
  cfg.task = "RECONSTRUCT";
  cfg.image_size = 16;
  cfg.num_classes = 3;
  cfg.extractor.patch_size = 2;
  cfg.extractor.window_size = 2;
  cfg.extractor.embed_dim = 8;
  cfg.extractor.attention_heads = 2;
  cfg.encoder.hidden_dim = 8;
  cfg.encoder.strides = {2};
  cfg.encoder.out_channels = 4;
  cfg.rxkb.channels = 8;
  cfg.recon.embed_dim = 16;
  cfg.recon.attention_heads = 2;
  cfg.recon.depth = 1;
  cfg.recon.refine_steps = 2;
  cfg.recon.up_channels = 8;
  cfg.seg.channels = 8;
  cfg.seed = 21;
  return cfg;
}

}  // namespace

TEST_CASE("full-chain eval passes are deterministic and respect contracts") {
  Pipeline p(toy_config());
  Rng rng(31);
  const Tensor img = random_tensor({16, 16, 3}, rng, 0.0, 1.0);
  const ChannelConfig ch = p.config().channel_config(10.0, 77);

  const Tensor out1 = p.reconstruct(img, ch);
  const Tensor out2 = p.reconstruct(img, ch);
  CHECK(out1.same_data(out2));
  CHECK(out1.dims() == std::vector<int>{16, 16, 3});
  CHECK(out1.min_value() >= 0.0);
  CHECK(out1.max_value() <= 1.0);

  const Tensor logits = p.segment_logits(img, ch);
  CHECK(logits.dims() == std::vector<int>{16, 16, 3});
  const SegmentationMask mask = p.segment(img, ch);
  CHECK(mask.height == 16);

  const ComplexSignal x = p.transmit_signal(img, TaskId::RECONSTRUCT);
  CHECK(static_cast<std::int64_t>(x.size()) == p.layout().symbol_count());
  CHECK(x.mean_power() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("the unified encoder is task-blind: task enters only through f") {
  Pipeline p(toy_config());
  Rng rng(37);
  const Tensor img = random_tensor({16, 16, 3}, rng, 0.0, 1.0);
  const FeatureMap f_rec = p.tx_kb().process(img, TaskId::RECONSTRUCT);
  const FeatureMap f_seg = p.tx_kb().process(img, TaskId::SEGMENT);
  // different features per task, one set of encoder weights
  CHECK(!f_rec.grid.same_data(f_seg.grid));
  const ComplexSignal a = p.encoder().encode(img, f_rec);
  const ComplexSignal b = p.encoder().encode(img, f_rec);
  CHECK(a == b);
  const ComplexSignal c = p.encoder().encode(img, f_seg);
  CHECK(a != c);
}

TEST_CASE("train-path channel matches the complex-domain transmit exactly") {
  Pipeline p(toy_config());
  Rng rng(41);
  const Tensor img = random_tensor({16, 16, 3}, rng, 0.0, 1.0);
  ChannelConfig ch = p.config().channel_config(5.0, 123);

  Graph g;
  auto fwd = p.forward_loss(g, img, nullptr, TaskId::RECONSTRUCT, ch);
  const Tensor& x = g.value(fwd.signal);
  const Tensor& y = g.value(fwd.received);

  std::vector<double> xr(x.data(), x.data() + x.size());
  const ComplexSignal yc = transmit(real_to_complex(xr), ch);
  const std::vector<double> yr = complex_to_real(yc);
  REQUIRE(static_cast<std::int64_t>(yr.size()) == y.size());
  for (std::int64_t i = 0; i < y.size(); ++i) {
    CHECK(y[i] == doctest::Approx(yr[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }

  // noiseless: received is bitwise the signal
  ch.noiseless = true;
  Graph g2;
  auto fwd2 = p.forward_loss(g2, img, nullptr, TaskId::RECONSTRUCT, ch);
  CHECK(g2.value(fwd2.received).same_data(g2.value(fwd2.signal)));
}

TEST_CASE("segmentation loss wiring consumes the mask with ignore support") {
  ExperimentConfig cfg = toy_config();
  cfg.task = "SEGMENT";
  Pipeline p(cfg);
  Rng rng(43);
  const Tensor img = random_tensor({16, 16, 3}, rng, 0.0, 1.0);
  SegmentationMask mask(16, 16, 1);
  mask.at(0, 0) = kIgnoreLabel;
  const ChannelConfig ch = cfg.channel_config(10.0, 5);
  Graph g;
  auto fwd = p.forward_loss(g, img, &mask, TaskId::SEGMENT, ch);
  CHECK(g.value(fwd.loss).size() == 1);
  CHECK(std::isfinite(g.value(fwd.loss)[0]));
  CHECK(fwd.objective == fwd.loss);

  SegmentationMask bad(16, 16, 9);  // label >= C
  Graph g2;
  CHECK_THROWS_AS((void)p.forward_loss(g2, img, &bad, TaskId::SEGMENT, ch), DataError);
}

TEST_CASE("autodiff through the whole chain matches finite differences (spot probes)") {
  ExperimentConfig cfg = toy_config();
  cfg.image_size = 8;
  cfg.extractor.patch_size = 1;
  Pipeline p(cfg);
  Rng rng(47);
  const Tensor img = random_tensor({8, 8, 3}, rng, 0.1, 0.9);
  const ChannelConfig ch = cfg.channel_config(12.0, 99);

  // two parameters from different modules
  for (const char* name : {"txkb.extract.stage1.block0.attn.q.w", "recon.head.w"}) {
    Tensor& param = p.params().get(name);
    REQUIRE(param.size() > 3);
    const std::int64_t idx = 3;

    Graph g;
    auto fwd = p.forward_loss(g, img, nullptr, TaskId::RECONSTRUCT, ch);
    g.backward(fwd.loss);
    const VarId pid = g.named_params().at(name);
    REQUIRE(g.has_grad(pid));
    const double analytic = g.grad(pid)[idx];

    const double h = 1e-5 * std::max(1.0, std::abs(param[idx]));
    const double saved = param[idx];
    param[idx] = saved + h;
    Graph gp;
    const double lp = gp.value(p.forward_loss(gp, img, nullptr, TaskId::RECONSTRUCT, ch).loss)[0];
    param[idx] = saved - h;
    Graph gm;
    const double lm = gm.value(p.forward_loss(gm, img, nullptr, TaskId::RECONSTRUCT, ch).loss)[0];
    param[idx] = saved;
    const double fd = (lp - lm) / (2 * h);
    INFO(name, ": autodiff ", analytic, " fd ", fd);
    CHECK(test::grad_close(analytic, fd, 1e-3, 1e-8));
  }
}
