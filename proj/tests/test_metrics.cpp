#include <doctest.h>

#include <cmath>
#include <optional>

#include "semcom/common.hpp"
#include "semcom/metrics.hpp"
#include "semcom/rng.hpp"
#include "test_util.hpp"

using namespace semcom;
using test::random_tensor;

namespace {

// independent elementwise oracle
double mse_oracle(const Tensor& a, const Tensor& b) {
  long double acc = 0.0L;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i];
    acc += d * d;
  }
  return static_cast<double>(acc / a.size());
}

SegmentationMask random_mask(int h, int w, int classes, Rng& rng) {
  SegmentationMask m(h, w);
  for (auto& v : m.labels) v = rng.uniform_int(0, classes - 1);
  return m;
}

// brute-force set counting oracle
std::optional<double> iou_oracle(const SegmentationMask& a, const SegmentationMask& b,
                                 int cls) {
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b.labels[i] == kIgnoreLabel) continue;
    const bool pa = a.labels[i] == cls, pb = b.labels[i] == cls;
    if (pa && pb) ++inter;
    if (pa || pb) ++uni;
  }
  if (uni == 0) return std::nullopt;
  return double(inter) / uni;
}

}  // namespace

TEST_CASE("loss_reconstruction: analytic cases and brute-force agreement") {
  Tensor i0 = Tensor::zeros({4, 4, 3});
  CHECK(loss_reconstruction(i0, i0) == 0.0);
  Tensor half = Tensor::full({4, 4, 3}, 0.5);
  CHECK(loss_reconstruction(i0, half) == doctest::Approx(0.25).epsilon(1e-12));

  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    Tensor a = random_tensor({8, 8, 3}, rng, 0.0, 1.0);
    Tensor b = random_tensor({8, 8, 3}, rng, 0.0, 1.0);
    CHECK(std::abs(loss_reconstruction(a, b) - mse_oracle(a, b)) < 1e-9);
  }
  CHECK_THROWS_AS((void)loss_reconstruction(i0, Tensor::zeros({4, 4, 1})), Error);
}

TEST_CASE("psnr: analytic values and the infinite sentinel") {
  Tensor a = Tensor::full({10, 10, 1}, 0.5);
  CHECK(psnr_is_infinite(psnr(a, a)));

  // MAX=1, MSE=0.01 -> 20 dB
  Tensor b = a;
  for (std::int64_t i = 0; i < b.size(); ++i) b[i] += 0.1;
  CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-9));

  // MAX=255 with MSE=255^2 -> 0 dB
  Tensor z = Tensor::zeros({5, 5, 1});
  Tensor m = Tensor::full({5, 5, 1}, 255.0);
  CHECK(psnr(z, m, 255.0) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)psnr(a, b, 0.0), Error);

  // strictly decreasing under growing noise
  Rng rng(17);
  Tensor img = random_tensor({16, 16, 3}, rng, 0.0, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double sigma : {0.01, 0.05, 0.1}) {
    Tensor noisy = img;
    Rng nrng(99);
    for (std::int64_t i = 0; i < noisy.size(); ++i) noisy[i] += sigma * nrng.gaussian();
    const double v = psnr(img, noisy);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("iou: analytic cases") {
  SegmentationMask truth(4, 4, 0), pred(4, 4, 0);
  // truth: 8 cells of class 1 (rows 0-1), pred: 8 cells shifted by one row -> 4 overlap
  for (int j = 0; j < 4; ++j) {
    truth.at(0, j) = 1;
    truth.at(1, j) = 1;
    pred.at(1, j) = 1;
    pred.at(2, j) = 1;
  }
  const auto v = iou(pred, truth, 1);
  REQUIRE(v.has_value());
  CHECK(*v == doctest::Approx(4.0 / 12.0).epsilon(1e-12));

  CHECK(*iou(truth, truth, 1) == 1.0);

  // disjoint regions
  SegmentationMask p2(4, 4, 0);
  p2.at(3, 3) = 1;
  SegmentationMask t2(4, 4, 0);
  t2.at(0, 0) = 1;
  CHECK(*iou(p2, t2, 1) == 0.0);

  // class absent from both -> undefined
  CHECK(!iou(p2, t2, 2).has_value());

  // ignore pixels are excluded
  SegmentationMask t3 = truth;
  for (int j = 0; j < 4; ++j) t3.at(2, j) = kIgnoreLabel;
  CHECK(*iou(pred, t3, 1) == doctest::Approx(0.5));  // pred row 2 no longer counts
}

TEST_CASE("iou properties: symmetry in sets, relabeling invariance, bounds") {
  Rng rng(23);
  for (int t = 0; t < 100; ++t) {
    SegmentationMask a = random_mask(16, 16, 3, rng);
    SegmentationMask b = random_mask(16, 16, 3, rng);
    for (int cls = 0; cls < 3; ++cls) {
      const auto x = iou(a, b, cls);
      const auto y = iou_oracle(a, b, cls);
      REQUIRE(x.has_value() == y.has_value());
      if (x) {
        CHECK(*x == doctest::Approx(*y).epsilon(1e-12));
        CHECK(*x >= 0.0);
        CHECK(*x <= 1.0);
      }
    }
    CHECK(mean_iou(a, b, 3) == doctest::Approx(mean_iou(a, b, 3)));

    // relabel both masks with a permutation: per-class multiset is permuted
    auto relabel = [](const SegmentationMask& m) {
      SegmentationMask out = m;
      for (auto& v : out.labels) v = (v + 1) % 3;
      return out;
    };
    CHECK(mean_iou(relabel(a), relabel(b), 3) ==
          doctest::Approx(mean_iou(a, b, 3)).epsilon(1e-12));
  }
}

TEST_CASE("mean_iou: perfect, disjoint, and brute-force two-class case") {
  Rng rng(31);
  SegmentationMask a = random_mask(8, 8, 3, rng);
  CHECK(mean_iou(a, a, 3) == doctest::Approx(1.0));

  SegmentationMask left(4, 4, 0), right(4, 4, 1);
  // single-class images with disjoint class sets: both defined classes score 0
  CHECK(mean_iou(left, right, 2) == doctest::Approx(0.0));

  for (int t = 0; t < 50; ++t) {
    SegmentationMask p = random_mask(6, 6, 2, rng);
    SegmentationMask q = random_mask(6, 6, 2, rng);
    double acc = 0.0;
    int cnt = 0;
    for (int cls = 0; cls < 2; ++cls) {
      if (auto v = iou_oracle(p, q, cls)) {
        acc += *v;
        ++cnt;
      }
    }
    REQUIRE(cnt > 0);
    CHECK(mean_iou(p, q, 2) == doctest::Approx(acc / cnt).epsilon(1e-9));
  }
}

TEST_CASE("the streaming scorer matches per-mask counting on one mask pair") {
  Rng rng(37);
  SegmentationMask p = random_mask(12, 12, 3, rng);
  SegmentationMask q = random_mask(12, 12, 3, rng);
  SegmentationScorer sc(3);
  sc.add(p, q);
  CHECK(sc.mean_iou() == doctest::Approx(mean_iou(p, q, 3)).epsilon(1e-12));
  CHECK(sc.pixel_accuracy() == doctest::Approx(pixel_accuracy(p, q)).epsilon(1e-12));
}

TEST_CASE("argmax_mask breaks ties toward class 0") {
  Tensor logits = Tensor::zeros({2, 2, 3});
  logits.at(1, 1, 2) = 5.0;
  const SegmentationMask m = argmax_mask(logits);
  CHECK(m.at(0, 0) == 0);
  CHECK(m.at(1, 1) == 2);
}
