#include <doctest.h>

#include <cmath>

#include "dsva/ac.hpp"
#include "dsva/errors.hpp"
#include "dsva/rng.hpp"
#include "test_helpers.hpp"

using namespace dsva;

namespace {

AttentionMapStack make_stack(const Mat& maps, int k) {
  AttentionMapStack stack;
  stack.k = k;
  stack.maps = maps;
  return stack;
}

ConcentrationMask mask_from_cells(const std::vector<int>& cells, int k) {
  ConcentrationMask cm;
  cm.k = k;
  cm.mean_attention = Mat::Zero(k, k);
  cm.threshold = 0.5;
  cm.mask.resize(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) cm.mask(r, c) = cells[static_cast<std::size_t>(r * k + c)];
  return cm;
}

}  // namespace

TEST_CASE("mean_attention: a single map is its own mean") {
  Rng rng(1);
  const Mat maps = helpers::random_matrix(1, 4, rng);
  const Mat mean = mean_attention(make_stack(maps, 2));
  CHECK(mean(0, 0) == maps(0, 0));
  CHECK(mean(0, 1) == maps(0, 1));
  CHECK(mean(1, 0) == maps(0, 2));
  CHECK(mean(1, 1) == maps(0, 3));
}

TEST_CASE("mean_attention: opposite maps cancel") {
  Rng rng(2);
  Mat maps(2, 9);
  maps.row(0) = helpers::random_matrix(1, 9, rng);
  maps.row(1) = -maps.row(0);
  const Mat mean = mean_attention(make_stack(maps, 3));
  CHECK(mean.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mean_attention: matches the element-wise oracle") {
  Rng rng(3);
  const Mat maps = helpers::random_matrix(3, 4, rng);
  const Mat mean = mean_attention(make_stack(maps, 2));
  const auto expect = oracle::mean_of_maps(oracle::from_eigen(maps));
  for (int n = 0; n < 4; ++n)
    CHECK(std::fabs(mean(n / 2, n % 2) - expect[static_cast<std::size_t>(n)]) < 1e-12);
}

TEST_CASE("concentration_mask: uniform attention turns every cell on") {
  const Mat mean = Mat::Constant(3, 3, 0.42);
  const auto cm = concentration_mask(mean);
  CHECK(cm.threshold == doctest::Approx(0.42));
  CHECK(cm.mask.sum() == 9);
}

TEST_CASE("concentration_mask: worked 2x2 example") {
  Mat mean(2, 2);
  mean << 1, 2, 3, 4;
  const auto cm = concentration_mask(mean);
  CHECK(cm.threshold == doctest::Approx(2.5));
  CHECK(cm.mask(0, 0) == 0);
  CHECK(cm.mask(0, 1) == 0);
  CHECK(cm.mask(1, 0) == 1);
  CHECK(cm.mask(1, 1) == 1);
}

TEST_CASE("concentration_mask: the argmax cell always passes") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(4));
    const Mat mean = helpers::random_matrix(k, k, rng);
    const auto cm = concentration_mask(mean);
    Eigen::Index r, c;
    mean.maxCoeff(&r, &c);
    CHECK(cm.mask(r, c) == 1);
    CHECK(cm.mask.sum() >= 1);
  }
}

TEST_CASE("crop_box: full mask covers the whole grid") {
  const auto cm = mask_from_cells({1, 1, 1, 1}, 2);
  const CropBox box = crop_box(cm);
  CHECK(box == CropBox{0, 1, 0, 1});
}

TEST_CASE("crop_box: worked examples") {
  CHECK(crop_box(mask_from_cells({0, 0, 1, 1}, 2)) == CropBox{1, 1, 0, 1});
  std::vector<int> cells(16, 0);
  cells[2 * 4 + 3] = 1;
  CHECK(crop_box(mask_from_cells(cells, 4)) == CropBox{2, 2, 3, 3});
}

TEST_CASE("crop_box: minimal over all nonzero masks at k=2 and random masks at k=5") {
  // exhaustive k=2
  for (int bits = 1; bits < 16; ++bits) {
    std::vector<int> cells(4);
    for (int i = 0; i < 4; ++i) cells[static_cast<std::size_t>(i)] = (bits >> i) & 1;
    const CropBox box = crop_box(mask_from_cells(cells, 2));
    const auto expect = oracle::crop_box(cells, 2);
    CHECK(box.row_min == expect.row_min);
    CHECK(box.row_max == expect.row_max);
    CHECK(box.col_min == expect.col_min);
    CHECK(box.col_max == expect.col_max);
    // minimality: every boundary line holds a nonzero cell
    bool top = false, bottom = false, left = false, right = false;
    for (int c = 0; c < 2; ++c) {
      top |= cells[static_cast<std::size_t>(box.row_min * 2 + c)] != 0;
      bottom |= cells[static_cast<std::size_t>(box.row_max * 2 + c)] != 0;
    }
    for (int r = 0; r < 2; ++r) {
      left |= cells[static_cast<std::size_t>(r * 2 + box.col_min)] != 0;
      right |= cells[static_cast<std::size_t>(r * 2 + box.col_max)] != 0;
    }
    CHECK(top);
    CHECK(bottom);
    CHECK(left);
    CHECK(right);
  }

  // random k=5
  Rng rng(5);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<int> cells(25, 0);
    bool any = false;
    for (auto& cell : cells) {
      cell = rng.uniform() < 0.3 ? 1 : 0;
      any |= cell != 0;
    }
    if (!any) cells[static_cast<std::size_t>(rng.uniform_int(25))] = 1;
    const CropBox box = crop_box(mask_from_cells(cells, 5));
    const auto expect = oracle::crop_box(cells, 5);
    CHECK(box.row_min == expect.row_min);
    CHECK(box.row_max == expect.row_max);
    CHECK(box.col_min == expect.col_min);
    CHECK(box.col_max == expect.col_max);
  }
}

TEST_CASE("crop_and_resize: the full-cover box is the identity") {
  Rng rng(6);
  const ImageTensor img = helpers::random_image(8, rng);
  const ImageTensor out = crop_and_resize(img, CropBox{0, 3, 0, 3}, 4);
  REQUIRE(out.values.size() == img.values.size());
  for (std::size_t i = 0; i < img.values.size(); ++i) CHECK(out.values[i] == img.values[i]);
}

TEST_CASE("crop_and_resize: left-half box excludes right-half pixels") {
  ImageTensor img = ImageTensor::zeros(8, 8, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = x < 4 ? 0.25 : 0.75;
  // box over the left half of a 2x2 grid
  const ImageTensor out = crop_and_resize(img, CropBox{0, 1, 0, 0}, 2);
  for (const auto v : out.values) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("crop_and_resize: point box on a checkerboard-aligned white patch") {
  ImageTensor img = ImageTensor::zeros(8, 8, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const double v = ((y / 2) + (x / 2)) % 2 == 0 ? 1.0 : 0.0;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
    }
  // patch (0,0) of the 4x4 grid is all white
  const ImageTensor out = crop_and_resize(img, CropBox{0, 0, 0, 0}, 4);
  for (const auto v : out.values) CHECK(v == 1.0);
}

TEST_CASE("crop_and_resize: preserves the [0,1] range") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const ImageTensor img = helpers::random_image(12, rng);
    const int k = 4;
    const int r0 = static_cast<int>(rng.uniform_int(k));
    const int r1 = r0 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k - r0)));
    const int c0 = static_cast<int>(rng.uniform_int(k));
    const int c1 = c0 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k - c0)));
    const ImageTensor out = crop_and_resize(img, CropBox{r0, r1, c0, c1}, k);
    out.validate();
  }
}

TEST_CASE("uniform attention: mask all ones, full box, identical crop") {
  Rng rng(8);
  const ImageTensor img = helpers::random_image(8, rng);
  const Mat maps = Mat::Constant(3, 16, 1.23);
  const auto mean = mean_attention(make_stack(maps, 4));
  const auto cm = concentration_mask(mean);
  CHECK(cm.mask.sum() == 16);
  const CropBox box = crop_box(cm);
  CHECK(box == CropBox{0, 3, 0, 3});
  const ImageTensor crop = crop_and_resize(img, box, 4);
  CHECK(crop.values == img.values);
}
