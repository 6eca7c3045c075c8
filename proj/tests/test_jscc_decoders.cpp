#include <doctest.h>

#include <cmath>

#include "semcom/common.hpp"
#include "semcom/jscc_decoders.hpp"
#include "test_util.hpp"

using namespace semcom;
using test::random_tensor;

namespace {

SignalLayout desk_layout() { return {16, 16, 8}; }

ReconDecoderConfig recon_cfg() {
  ReconDecoderConfig cfg;
  cfg.depth = 2;
  cfg.patch_size = 2;
  cfg.attention_heads = 4;
  cfg.embed_dim = 48;
  cfg.refine_steps = 3;
  cfg.up_channels = 8;
  return cfg;
}

ComplexSignal random_received(const SignalLayout& layout, std::uint64_t seed,
                              double amp = 1.0) {
  Rng rng(seed);
  ComplexSignal y;
  for (std::int64_t i = 0; i < layout.symbol_count(); ++i) {
    y.symbols.emplace_back(rng.uniform(-amp, amp), rng.uniform(-amp, amp));
  }
  return y;
}

}  // namespace

TEST_CASE("reconstruction decoder: shape and range contracts for arbitrary inputs") {
  ParamStore store(3);
  ReconDecoder dec(store, "recon", recon_cfg(), desk_layout(), 32, 32, 16);
  Rng rng(5);
  for (double amp : {0.1, 1.0, 50.0}) {
    const ComplexSignal y = random_received(desk_layout(), 7, amp);
    const RxFeature f{random_tensor({16, 16, 16}, rng, -amp, amp), 0, true};
    const Tensor out = dec.decode(y, f);
    CHECK(out.dims() == std::vector<int>{32, 32, 3});
    CHECK(out.min_value() >= 0.0);
    CHECK(out.max_value() <= 1.0);
  }

  // determinism
  const ComplexSignal y = random_received(desk_layout(), 11);
  const RxFeature f{random_tensor({16, 16, 16}, rng), 0, true};
  CHECK(dec.decode(y, f).same_data(dec.decode(y, f)));

  // layout mismatch
  ComplexSignal bad = y;
  bad.symbols.resize(100);
  CHECK_THROWS_AS((void)dec.decode(bad, f), Error);
}

TEST_CASE("refinement step count changes the output on fixed weights") {
  ParamStore store(13);
  ReconDecoder dec(store, "recon", recon_cfg(), desk_layout(), 32, 32, 16);
  Rng rng(17);
  const ComplexSignal y = random_received(desk_layout(), 19);
  const RxFeature f{random_tensor({16, 16, 16}, rng), 0, true};
  const Tensor k1 = dec.decode(y, f, 1);
  const Tensor k4 = dec.decode(y, f, 4);
  CHECK(k1.same_shape(k4));
  CHECK(!k1.same_data(k4));
  // both remain valid images
  CHECK(k1.min_value() >= 0.0);
  CHECK(k4.max_value() <= 1.0);

  ReconDecoderConfig bad = recon_cfg();
  bad.refine_steps = 0;
  CHECK_THROWS_AS(ReconDecoder(store, "r2", bad, desk_layout(), 32, 32, 16), ConfigError);
}

TEST_CASE("segmentation decoder: logits shape including the 21-class case") {
  ParamStore store(23);
  SegDecoderConfig cfg;
  cfg.channels = 16;
  cfg.num_classes = 21;
  SegDecoder dec(store, "seg", cfg, desk_layout(), 32, 32, 16);
  Rng rng(29);
  const ComplexSignal y = random_received(desk_layout(), 31);
  const RxFeature f{random_tensor({16, 16, 16}, rng), 1, true};
  const Tensor logits = dec.decode(y, f);
  CHECK(logits.dims() == std::vector<int>{32, 32, 21});
  CHECK(logits.all_finite());

  // evaluation passes are deterministic (dropout off)
  CHECK(logits.same_data(dec.decode(y, f)));
}

TEST_CASE("zeroed residual branches and head give uniform logits, argmax class 0") {
  ParamStore store(37);
  SegDecoderConfig cfg;
  cfg.channels = 12;
  cfg.num_classes = 5;
  SegDecoder dec(store, "seg", cfg, desk_layout(), 32, 32, 16);
  store.zero_matching("seg.block");
  store.zero_matching("seg.head");
  Rng rng(41);
  const Tensor logits = dec.decode(random_received(desk_layout(), 43),
                                   {random_tensor({16, 16, 16}, rng), 1, true});
  for (std::int64_t i = 0; i < logits.size(); ++i) CHECK(logits[i] == 0.0);
  const SegmentationMask m = argmax_mask(logits);
  for (auto v : m.labels) CHECK(v == 0);
}

TEST_CASE("training-mode dropout perturbs logits; rate off restores determinism") {
  ParamStore store(47);
  SegDecoderConfig cfg;
  cfg.channels = 12;
  cfg.num_classes = 3;
  cfg.dropout = 0.5;
  SegDecoder dec(store, "seg", cfg, desk_layout(), 32, 32, 16);
  Rng rng(53);
  const auto reals = complex_to_real(random_received(desk_layout(), 59));
  const Tensor y({static_cast<int>(reals.size())}, reals);
  const Tensor f = random_tensor({16, 16, 16}, rng);

  Graph g1;
  Rng d1(1);
  const Tensor a = g1.value(dec.forward(g1, g1.constant(y), g1.constant(f), true, &d1));
  Graph g2;
  Rng d2(2);
  const Tensor b = g2.value(dec.forward(g2, g2.constant(y), g2.constant(f), true, &d2));
  CHECK(!a.same_data(b));

  Graph g3;
  const Tensor c = g3.value(dec.forward(g3, g3.constant(y), g3.constant(f), false, nullptr));
  Graph g4;
  const Tensor d = g4.value(dec.forward(g4, g4.constant(y), g4.constant(f), false, nullptr));
  CHECK(c.same_data(d));
}

TEST_CASE("loss_segmentation: analytic anchors") {
  // uniform logits over 21 classes: loss = log 21 per pixel
  Tensor logits = Tensor::zeros({4, 4, 21});
  SegmentationMask mask(4, 4, 3);
  CHECK(loss_segmentation(logits, mask) == doctest::Approx(std::log(21.0)).epsilon(1e-9));

  // strongly one-hot logits at the true class: loss below 1e-8
  Tensor hot = Tensor::zeros({2, 2, 4});
  SegmentationMask m2(2, 2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) hot.at(i, j, 2) = 100.0;
  CHECK(loss_segmentation(hot, m2) < 1e-8);
  CHECK(loss_segmentation(hot, m2) >= 0.0);

  // ignore pixels are excluded
  SegmentationMask m3(2, 2, 2);
  m3.at(0, 0) = kIgnoreLabel;
  CHECK(loss_segmentation(hot, m3) < 1e-8);
  SegmentationMask all_ignored(2, 2, kIgnoreLabel);
  CHECK_THROWS_AS((void)loss_segmentation(hot, all_ignored), DataError);

  // invalid label
  SegmentationMask bad(2, 2, 9);
  CHECK_THROWS_AS((void)loss_segmentation(hot, bad), DataError);
}

TEST_CASE("loss_segmentation: brute-force agreement and shift invariance") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = random_tensor({6, 6, 5}, rng, -4.0, 4.0);
    SegmentationMask mask(6, 6);
    for (auto& v : mask.labels) v = rng.uniform_int(0, 4);
    mask.labels[0] = kIgnoreLabel;

    // independent per-pixel oracle without max-stabilization
    double ref = 0.0;
    int valid = 0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        if (mask.at(i, j) == kIgnoreLabel) continue;
        double z = 0.0;
        for (int c = 0; c < 5; ++c) z += std::exp(logits.at(i, j, c));
        ref += -std::log(std::exp(logits.at(i, j, mask.at(i, j))) / z);
        ++valid;
      }
    ref /= valid;
    const double got = loss_segmentation(logits, mask);
    CHECK(std::abs(got - ref) < 1e-6);

    // shift invariance within 1e-9
    Tensor shifted = logits;
    const double c0 = rng.uniform(-10.0, 10.0);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int c = 0; c < 5; ++c) shifted.at(i, j, c) += c0;
    CHECK(std::abs(loss_segmentation(shifted, mask) - got) < 1e-9);
  }
}

TEST_CASE("loss_reconstruction is zero iff the images match") {
  Rng rng(67);
  const Tensor a = random_tensor({8, 8, 3}, rng, 0.0, 1.0);
  CHECK(loss_reconstruction(a, a) == 0.0);
  Tensor b = a;
  b[17] += 1e-6;
  CHECK(loss_reconstruction(a, b) > 0.0);
}
