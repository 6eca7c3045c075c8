#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "semcom/common.hpp"
#include "semcom/data.hpp"

using namespace semcom;
namespace fs = std::filesystem;

namespace {

SyntheticParams desk_params() {
  SyntheticParams p;
  p.image_size = 32;
  p.num_classes = 3;
  p.train_count = 12;
  p.val_count = 4;
  p.seed = 7;
  return p;
}

}  // namespace

TEST_CASE("synthetic generation: determinism, label range, pixel range") {
  const auto a = generate_synthetic(desk_params(), Split::train);
  const auto b = generate_synthetic(desk_params(), Split::train);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image.same_data(b[i].image));
    CHECK(a[i].mask == b[i].mask);
    CHECK(a[i].image.min_value() >= 0.0);
    CHECK(a[i].image.max_value() <= 1.0);
    for (auto v : a[i].mask.labels) {
      CHECK(v >= 0);
      CHECK(v <= 2);
    }
  }

  SyntheticParams other = desk_params();
  other.seed = 8;
  const auto c = generate_synthetic(other, Split::train);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].image.same_data(c[i].image)) any_differs = true;
  }
  CHECK(any_differs);

  // zero shapes: all-background masks
  SyntheticParams empty = desk_params();
  empty.shapes_min = 0;
  empty.shapes_max = 0;
  for (const auto& s : generate_synthetic(empty, Split::val)) {
    for (auto v : s.mask.labels) CHECK(v == 0);
  }

  SyntheticParams bad = desk_params();
  bad.image_size = 8;
  CHECK_THROWS_AS((void)generate_synthetic(bad, Split::train), ConfigError);
  bad = desk_params();
  bad.num_classes = 1;
  CHECK_THROWS_AS((void)generate_synthetic(bad, Split::train), ConfigError);
}

TEST_CASE("a centered disk rasterizes to pi r^2 pixels within 4r") {
  const double color[3] = {0.8, 0.1, 0.1};
  for (double r : {4.0, 6.5, 9.0, 12.0}) {
    Tensor img = Tensor::zeros({64, 64, 3});
    SegmentationMask mask(64, 64, 0);
    draw_disk(img, mask, 32.0, 32.0, r, 1, color);
    std::int64_t count = 0;
    for (auto v : mask.labels) count += (v == 1);
    const double area = std::numbers::pi * r * r;
    INFO("r=", r, " count=", count, " area=", area);
    CHECK(std::abs(static_cast<double>(count) - area) <= 4.0 * r);
    // image/mask consistency is exact: colored pixels are exactly mask pixels
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const bool colored = img.at(y, x, 0) != 0.0;
        CHECK(colored == (mask.at(y, x) == 1));
      }
  }

  // rectangle pixel count is exact
  Tensor img = Tensor::zeros({32, 32, 3});
  SegmentationMask mask(32, 32, 0);
  draw_rect(img, mask, 16.0, 16.0, 5.0, 3.0, 2, color);
  std::int64_t count = 0;
  for (auto v : mask.labels) count += (v == 2);
  CHECK(count == 10 * 6);
}

TEST_CASE("folder round-trip: save then reload gives identical batches") {
  const std::string root = "data_roundtrip_test";
  fs::remove_all(root);
  const auto train = generate_synthetic(desk_params(), Split::train);
  const auto val = generate_synthetic(desk_params(), Split::val);
  save_dataset_folder(root, train, val);

  DatasetSpec spec;
  spec.kind = DatasetKind::folder;
  spec.root = root;
  spec.split = Split::train;
  spec.num_classes = 3;
  const Dataset loaded = Dataset::load(spec);
  REQUIRE(loaded.size() == train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    // folder order follows the manifest
    CHECK(loaded.sample(i).stem == train[i].stem);
    CHECK(loaded.sample(i).image.same_data(train[i].image));
    CHECK(loaded.sample(i).mask == train[i].mask);
  }

  DatasetSpec synth_spec;
  synth_spec.kind = DatasetKind::synthetic;
  synth_spec.synth = desk_params();
  synth_spec.split = Split::train;
  const Dataset synth = Dataset::load(synth_spec);
  const auto b1 = synth.load_batch(4, 0, 99);
  const auto b2 = loaded.load_batch(4, 0, 99);
  REQUIRE(b1.images.size() == b2.images.size());
  for (std::size_t i = 0; i < b1.images.size(); ++i) {
    CHECK(b1.images[i].same_data(b2.images[i]));
    CHECK(b1.masks[i] == b2.masks[i]);
  }
  fs::remove_all(root);
}

TEST_CASE("missing mask is a pairing error naming the stem") {
  const std::string root = "data_missing_mask_test";
  fs::remove_all(root);
  auto train = generate_synthetic(desk_params(), Split::train);
  train.resize(3);
  save_dataset_folder(root, train, {});
  fs::remove(fs::path(root) / "masks" / (train[1].stem + ".png"));

  DatasetSpec spec;
  spec.kind = DatasetKind::folder;
  spec.root = root;
  spec.split = Split::train;
  spec.require_masks = true;
  CHECK_THROWS_WITH_AS((void)Dataset::load(spec),
                       doctest::Contains(train[1].stem.c_str()), DataError);

  // reconstruction-style loading tolerates the missing mask
  spec.require_masks = false;
  CHECK_NOTHROW((void)Dataset::load(spec));
  fs::remove_all(root);
}

TEST_CASE("batches: deterministic under the epoch seed, index range enforced") {
  DatasetSpec spec;
  spec.kind = DatasetKind::synthetic;
  spec.synth = desk_params();
  spec.split = Split::train;
  const Dataset d = Dataset::load(spec);
  CHECK(d.num_batches(4) == 3);
  CHECK(d.num_batches(5) == 3);  // last batch short

  const auto a = d.load_batch(4, 1, 7);
  const auto b = d.load_batch(4, 1, 7);
  REQUIRE(a.images.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a.images[i].same_data(b.images[i]));

  const auto c = d.load_batch(4, 1, 8);
  bool differs = false;
  for (std::size_t i = 0; i < 4; ++i) differs |= !a.images[i].same_data(c.images[i]);
  CHECK(differs);

  CHECK_THROWS_AS((void)d.load_batch(4, 3, 7), DataError);
  CHECK_THROWS_AS((void)d.load_batch(4, -1, 7), DataError);
}

TEST_CASE("resize: bilinear stays in range, nearest preserves labels") {
  const auto samples = generate_synthetic(desk_params(), Split::val);
  const Tensor& img = samples[0].image;
  const Tensor up = resize_bilinear(img, 48, 48);
  CHECK(up.dims() == std::vector<int>{48, 48, 3});
  CHECK(up.min_value() >= 0.0);
  CHECK(up.max_value() <= 1.0);
  // identity resize returns the same pixels
  CHECK(resize_bilinear(img, 32, 32).same_data(img));

  const SegmentationMask& m = samples[0].mask;
  const SegmentationMask mu = resize_nearest(m, 48, 48);
  for (auto v : mu.labels) {
    CHECK(v >= 0);
    CHECK(v <= 2);
  }
  CHECK(resize_nearest(m, 32, 32) == m);
}

TEST_CASE("mask png round-trip keeps labels and the ignore value") {
  SegmentationMask m(8, 8, 0);
  m.at(1, 1) = 2;
  m.at(3, 3) = kIgnoreLabel;
  const std::string path = "mask_roundtrip.png";
  write_png_gray(path, mask_to_png(m));
  const SegmentationMask back = png_to_mask(read_png_labels(path));
  CHECK(back == m);
  fs::remove(path);
}
