#include <doctest.h>

#include <cmath>

#include "semcom/common.hpp"
#include "semcom/rx_kb.hpp"
#include "test_util.hpp"

using namespace semcom;
using test::random_tensor;

namespace {

SignalLayout desk_layout() { return {8, 8, 8}; }

ComplexSignal random_received(const SignalLayout& layout, std::uint64_t seed) {
  Rng rng(seed);
  ComplexSignal y;
  for (std::int64_t i = 0; i < layout.symbol_count(); ++i) {
    y.symbols.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1));
  }
  return y;
}

}  // namespace

TEST_CASE("shape contract: g1 and g2 live on the layout grid with c_kb channels") {
  ParamStore store(3);
  RxKb rx(store, "rxkb", RxKbConfig{.channels = 24, .kernel = 3}, desk_layout());
  const ComplexSignal y = random_received(desk_layout(), 5);
  const auto f = rx.generate_features(y);
  CHECK(f.g1.grid.dims() == std::vector<int>{8, 8, 24});
  CHECK(f.g2.grid.dims() == std::vector<int>{8, 8, 24});
  CHECK(f.g1.block_index == 1);
  CHECK(f.g2.block_index == 2);

  // determinism
  const auto again = rx.generate_features(y);
  CHECK(f.g1.grid.same_data(again.g1.grid));
  CHECK(f.g2.grid.same_data(again.g2.grid));

  // signal length inconsistent with the declared layout
  ComplexSignal bad = y;
  bad.symbols.pop_back();
  CHECK_THROWS_AS((void)rx.generate_features(bad), Error);
}

TEST_CASE("identity skips hold exactly with zeroed residual branches") {
  ParamStore store(7);
  RxKb rx(store, "rxkb", RxKbConfig{.channels = 16, .kernel = 3}, desk_layout());
  REQUIRE(store.zero_matching("rxkb.block") == 8);  // 2 blocks x 2 convs x (w,b)
  const auto f = rx.generate_features(random_received(desk_layout(), 11));
  CHECK(f.g1.grid.same_data(f.entry));
  CHECK(f.g2.grid.same_data(f.g1.grid));
}

TEST_CASE("selection: segmentation passes g1 through bit-identically") {
  Rng rng(13);
  RxFeature g1{random_tensor({8, 8, 16}, rng), 1, false};
  RxFeature g2{random_tensor({8, 8, 16}, rng), 2, false};

  const RxFeature seg = RxKb::select_rx_features(TaskId::SEGMENT, g1, g2);
  CHECK(seg.grid.same_data(g1.grid));
  CHECK(seg.selected);

  // perturbing g2 cannot change the segmentation selection
  RxFeature g2_poked{random_tensor({8, 8, 16}, rng, -50, 50), 2, false};
  const RxFeature seg2 = RxKb::select_rx_features(TaskId::SEGMENT, g1, g2_poked);
  CHECK(seg2.grid.same_data(seg.grid));

  // reconstruction: g1 + g2 elementwise; zero g2 is the additive identity
  const RxFeature rec = RxKb::select_rx_features(TaskId::RECONSTRUCT, g1, g2);
  for (std::int64_t i = 0; i < rec.grid.size(); ++i) {
    CHECK(std::abs(rec.grid[i] - g1.grid[i] - g2.grid[i]) < 1e-6);
  }
  RxFeature zero{Tensor::zeros({8, 8, 16}), 2, false};
  const RxFeature rec0 = RxKb::select_rx_features(TaskId::RECONSTRUCT, g1, zero);
  CHECK(rec0.grid.same_data(g1.grid));
}

TEST_CASE("graph selection matches the eval-mode selection") {
  ParamStore store(17);
  RxKb rx(store, "rxkb", RxKbConfig{.channels = 16, .kernel = 3}, desk_layout());
  const ComplexSignal y = random_received(desk_layout(), 19);
  const auto eval_features = rx.generate_features(y);

  Graph g;
  const auto reals = complex_to_real(y);
  auto f = rx.generate(g, g.constant(Tensor({static_cast<int>(reals.size())}, reals)));
  VarId rec = rx.select(g, TaskId::RECONSTRUCT, f.g1, f.g2);
  const auto expect =
      RxKb::select_rx_features(TaskId::RECONSTRUCT, eval_features.g1, eval_features.g2);
  for (std::int64_t i = 0; i < expect.grid.size(); ++i) {
    CHECK(g.value(rec)[i] == doctest::Approx(expect.grid[i]).epsilon(1e-12));
  }
}

TEST_CASE("smoke: g1 drifts further from the clean feature as noise grows") {
  ParamStore store(23);
  RxKb rx(store, "rxkb", RxKbConfig{.channels = 16, .kernel = 3}, desk_layout());

  const int signals = 8;
  std::vector<double> distances;
  for (double sigma : {0.02, 0.1, 0.3, 0.6, 1.0}) {
    double acc = 0.0;
    for (int s = 0; s < signals; ++s) {
      const ComplexSignal clean = random_received(desk_layout(), 100 + s);
      ComplexSignal noisy = clean;
      Rng nrng(derive_seed(7, static_cast<std::uint64_t>(s),
                           static_cast<std::uint64_t>(sigma * 1000)));
      for (auto& z : noisy.symbols) {
        z += std::complex<double>(sigma * nrng.gaussian(), sigma * nrng.gaussian());
      }
      const auto a = rx.generate_features(clean);
      const auto b = rx.generate_features(noisy);
      double d = 0.0;
      for (std::int64_t i = 0; i < a.g1.grid.size(); ++i) {
        const double diff = a.g1.grid[i] - b.g1.grid[i];
        d += diff * diff;
      }
      acc += std::sqrt(d);
    }
    distances.push_back(acc / signals);
  }
  // rank correlation must be positive; for averaged distances this comes out
  // strictly increasing
  for (std::size_t i = 1; i < distances.size(); ++i) {
    CHECK(distances[i] > distances[i - 1]);
  }
}
