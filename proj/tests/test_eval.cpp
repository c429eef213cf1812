#include <cmath>
#include <limits>

#include "doctest.h"
#include "lesiondiff/errors.hpp"
#include "lesiondiff/eval.hpp"
#include "lesiondiff/phantom.hpp"
#include "lesiondiff/rng.hpp"

using namespace lesiondiff;

namespace {

Mask from_bits(int h, int w, std::initializer_list<int> idx) {
  Mask m(h, w);
  for (int i : idx) m[static_cast<std::size_t>(i)] = 1;
  return m;
}

}  // namespace

TEST_CASE("dice") {
  const Mask a = from_bits(3, 3, {0, 1, 2, 3});
  const Mask b = from_bits(3, 3, {1, 2, 3, 4, 5, 6});
  CHECK(dice(a, b) == doctest::Approx(0.6));
  CHECK(dice(a, a) == 1.0);
  CHECK(dice(a, from_bits(3, 3, {7, 8})) == 0.0);
  CHECK(dice(Mask(3, 3), Mask(3, 3)) == 1.0);
  CHECK(dice(a, Mask(3, 3)) == 0.0);
  CHECK_THROWS_AS(dice(a, Mask(2, 3)), DimensionError);

  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    Mask x(5, 5), y(5, 5);
    for (std::size_t i = 0; i < 25; ++i) {
      x[i] = rng.uniform() < 0.3;
      y[i] = rng.uniform() < 0.3;
    }
    CHECK(dice(x, y) == dice(y, x));
    CHECK(dice(x, y) >= 0.0);
    CHECK(dice(x, y) <= 1.0);
    if (!x.empty()) CHECK(dice(x, x) == 1.0);
  }
}

TEST_CASE("toy segmenter on phantoms") {
  const PhantomSpec spec;
  double dice_sum = 0.0;
  int n = 0;
  std::size_t false_pixels = 0, wm_pixels = 0;
  // validation seeds, disjoint from the ones the acceptance run draws from
  for (std::uint64_t seed = 50000; seed < 50060; ++seed) {
    const PhantomPair p = generate_phantom(seed, spec);
    dice_sum += dice(toy_segment(p.lesioned, p.wm_mask), p.lesion_mask);
    ++n;
    false_pixels += toy_segment(p.healthy, p.wm_mask).count();
    wm_pixels += p.wm_mask.count();
  }
  MESSAGE("mean ground-truth dice " << dice_sum / n);
  CHECK(dice_sum / n >= 0.85);
  CHECK(static_cast<double>(false_pixels) <= 0.001 * static_cast<double>(wm_pixels));
}

TEST_CASE("toy segmenter edge cases") {
  const PhantomPair p = generate_phantom(5, PhantomSpec{});
  CHECK(toy_segment(ImageGrid(64, 64, 2, 0.6), p.wm_mask).empty());
  CHECK_THROWS_AS(toy_segment(p.lesioned, Mask(64, 64)), ConfigError);

  ImageGrid shifted = p.lesioned;
  for (double& v : shifted.data()) v += 0.37;
  CHECK(toy_segment(shifted, p.wm_mask) == toy_segment(p.lesioned, p.wm_mask));
  CHECK(toy_segment(p.lesioned, p.wm_mask) == toy_segment(p.lesioned, p.wm_mask));

  // a lone outlier pixel is below the component size
  ImageGrid img(16, 16, 2, 0.5);
  Rng rng(2);
  for (double& v : img.data()) v += 0.01 * rng.normal();
  img.at(8, 8, 0) = 0.0;
  img.at(8, 8, 1) = 1.0;
  CHECK(toy_segment(img, Mask(16, 16, 1)).empty());
  img.at(8, 9, 0) = img.at(9, 8, 0) = 0.0;
  img.at(8, 9, 1) = img.at(9, 8, 1) = 1.0;
  CHECK(toy_segment(img, Mask(16, 16, 1)).count() == 3);
}

TEST_CASE("fill_report") {
  const PhantomPair p = generate_phantom(11, PhantomSpec{});
  REQUIRE(!p.lesion_mask.empty());
  const MetricsReport perfect = fill_report(p.healthy, p);
  for (double m : perfect.mae_in_mask) CHECK(m == 0.0);
  for (double v : perfect.psnr_in_mask) CHECK(v == std::numeric_limits<double>::infinity());
  CHECK(!perfect.dice.has_value());

  const MetricsReport same = fill_report(p.lesioned, p);
  CHECK(same.outside_mask_max_abs_diff == 0.0);
  for (int c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (p.lesion_mask.at(y, x)) sum += std::abs(p.lesioned.at(y, x, c) - p.healthy.at(y, x, c));
    CHECK(same.mae_in_mask[static_cast<std::size_t>(c)] ==
          doctest::Approx(sum / static_cast<double>(p.lesion_mask.count())));
    CHECK(same.mae_in_mask[static_cast<std::size_t>(c)] > 0.05);
  }
  CHECK(same.mask_pixels == p.lesion_mask.count());

  ImageGrid off = p.lesioned;
  off.at(0, 0, 1) += 0.25;
  CHECK(fill_report(off, p).outside_mask_max_abs_diff == doctest::Approx(0.25));
}

TEST_CASE("synth_report") {
  const PhantomPair p = generate_phantom(12, PhantomSpec{});
  const MetricsReport r = synth_report(p.lesioned, p.lesion_mask, p.wm_mask);
  REQUIRE(r.dice.has_value());
  CHECK(*r.dice >= 0.85);
  const PhantomPair h = generate_phantom(12, PhantomSpec{}, false);
  CHECK(synth_report(h.healthy, Mask(64, 64), h.wm_mask).dice == 1.0);
}

TEST_CASE("error_in_mask") {
  ImageGrid a(2, 2, 1, 0.5), b(2, 2, 1, 0.5);
  b.at(0, 0, 0) = 0.6;
  std::vector<double> mae, psnr;
  error_in_mask(a, b, Mask(2, 2, 1), mae, psnr);
  CHECK(mae[0] == doctest::Approx(0.025));
  // mse = 0.0025, psnr = 10 log10(1 / 0.0025)
  CHECK(psnr[0] == doctest::Approx(10.0 * std::log10(400.0)));
}
