#include <doctest.h>

#include <cmath>

#include "semcom/common.hpp"
#include "semcom/jscc_encoder.hpp"
#include "test_util.hpp"

using namespace semcom;
using test::random_tensor;

namespace {

EncoderConfig desk_cfg() {
  EncoderConfig cfg;
  cfg.hidden_dim = 16;
  cfg.strides = {2};
  cfg.out_channels = 8;
  return cfg;
}

constexpr StageShape kDeskFeature{4, 4, 64};

FeatureMap selected(const Tensor& t) { return {t, FeatureLevel::selected}; }

}  // namespace

TEST_CASE("desk encoder: symbol count, unit power, determinism") {
  ParamStore store(3);
  JsccEncoder enc(store, "enc", desk_cfg(), 32, 32, kDeskFeature);
  CHECK(enc.layout().grid_h == 16);
  CHECK(enc.layout().grid_w == 16);
  CHECK(enc.layout().channels == 8);
  CHECK(enc.layout().symbol_count() == 1024);

  Rng rng(5);
  const Tensor img = random_tensor({32, 32, 3}, rng, 0.0, 1.0);
  const Tensor f = random_tensor({4, 4, 64}, rng);
  const ComplexSignal x = enc.encode(img, selected(f));
  CHECK(x.size() == 1024);
  CHECK(x.mean_power() == doctest::Approx(1.0).epsilon(1e-6));

  const ComplexSignal again = enc.encode(img, selected(f));
  CHECK(x == again);

  // symbol count depends only on the config, never on content
  const ComplexSignal other =
      enc.encode(random_tensor({32, 32, 3}, rng, 0.0, 1.0), selected(f));
  CHECK(other.size() == x.size());
}

TEST_CASE("paper-scale encoder: 224x224 to a 14x14 grid gives 1568 symbols") {
  ParamStore store(7);
  EncoderConfig cfg;
  cfg.hidden_dim = 8;  // thin hidden keeps this single forward quick
  cfg.strides = {2, 2, 2, 2};
  cfg.out_channels = 16;
  JsccEncoder enc(store, "enc", cfg, 224, 224, StageShape{14, 14, 384});
  CHECK(enc.layout().symbol_count() == 14 * 14 * 16 / 2);

  Rng rng(9);
  const ComplexSignal x = enc.encode(random_tensor({224, 224, 3}, rng, 0.0, 1.0),
                                     selected(random_tensor({14, 14, 384}, rng)));
  CHECK(static_cast<std::int64_t>(x.size()) == 1568);
  CHECK(x.mean_power() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bandwidth accounting against the 20 Kbit budget") {
  const auto r1 = bandwidth_bits(SignalLayout{14, 14, 16}, 8.0);
  CHECK(r1.symbol_count == 1568);
  CHECK(r1.bits == doctest::Approx(12544.0));
  CHECK(r1.within_bound);

  // exactly at the bound: compliant
  const auto r2 = bandwidth_bits(SignalLayout{16, 16, 20}, 8.0);
  CHECK(r2.symbol_count == 2560);
  CHECK(r2.bits == doctest::Approx(20480.0));
  CHECK(r2.within_bound);

  const auto r3 = bandwidth_bits(SignalLayout{16, 16, 20}, 8.1);
  CHECK_FALSE(r3.within_bound);

  CHECK_THROWS_AS((void)bandwidth_bits(SignalLayout{14, 14, 16}, 0.0), ConfigError);
}

TEST_CASE("config validation rejects degenerate setups at construction") {
  ParamStore store(11);
  EncoderConfig cfg = desk_cfg();
  cfg.out_channels = 7;  // odd: no complex pairing
  CHECK_THROWS_AS(JsccEncoder(store, "e1", cfg, 32, 32, kDeskFeature), ConfigError);

  cfg = desk_cfg();
  cfg.strides = {2, 2, 2, 2, 2, 2};  // 32 / 64: not a grid
  CHECK_THROWS_AS(JsccEncoder(store, "e2", cfg, 32, 32, kDeskFeature), ConfigError);

  cfg = desk_cfg();
  cfg.strides = {3};  // 32 % 3 != 0
  CHECK_THROWS_AS(JsccEncoder(store, "e3", cfg, 32, 32, kDeskFeature), ConfigError);

  // feature grid that does not tile the image
  CHECK_THROWS_AS(JsccEncoder(store, "e4", desk_cfg(), 32, 32, StageShape{5, 5, 64}),
                  ConfigError);
}

TEST_CASE("channel-count mismatch after concatenation is rejected") {
  ParamStore store(13);
  JsccEncoder enc(store, "enc", desk_cfg(), 32, 32, kDeskFeature);
  Rng rng(17);
  const Tensor img = random_tensor({32, 32, 3}, rng, 0.0, 1.0);
  CHECK_THROWS_AS((void)enc.encode(img, selected(random_tensor({4, 4, 32}, rng))), Error);
  CHECK_THROWS_AS((void)enc.encode(random_tensor({16, 16, 3}, rng, 0.0, 1.0),
                                   selected(random_tensor({4, 4, 64}, rng))),
                  Error);
}

TEST_CASE("encoder gradients: probe of x w.r.t. the image matches finite differences") {
  ParamStore store(19);
  EncoderConfig cfg;
  cfg.hidden_dim = 8;
  cfg.strides = {2};
  cfg.out_channels = 4;
  JsccEncoder enc(store, "enc", cfg, 8, 8, StageShape{2, 2, 8});
  Rng rng(23);
  const Tensor img = random_tensor({8, 8, 3}, rng, 0.1, 0.9);
  const Tensor f = random_tensor({2, 2, 8}, rng);
  const Tensor probe = random_tensor({2 * static_cast<int>(
                                          SignalLayout{4, 4, 4}.symbol_count())},
                                     rng);

  auto weighted = [&](Graph& g, VarId image) {
    VarId x = enc.forward(g, image, g.constant(f));
    return g.mean_all(g.mul(x, g.constant(probe)));
  };
  test::check_input_gradient(img, weighted, 1e-3, 1e-8, 24);

  // ||x||^2 is pinned by power normalization: the gradient w.r.t. the image
  // vanishes, in autodiff and by finite differences alike
  Graph g;
  VarId image = g.input(img);
  VarId x = enc.forward(g, image, g.constant(f));
  VarId norm_sq = g.sum_all(g.mul(x, x));
  // unit mean symbol power: sum of squared reals equals the symbol count
  CHECK(g.value(norm_sq)[0] == doctest::Approx(32.0).epsilon(1e-9));
  g.backward(norm_sq);
  REQUIRE(g.has_grad(image));
  for (std::int64_t i = 0; i < img.size(); ++i) {
    CHECK(std::abs(g.grad(image)[i]) < 1e-9);
  }
}
