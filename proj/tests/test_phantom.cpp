#include "doctest.h"
#include "lesiondiff/errors.hpp"
#include "lesiondiff/eval.hpp"
#include "lesiondiff/phantom.hpp"

using namespace lesiondiff;

namespace {

bool subset(const Mask& a, const Mask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("phantom pair invariants over 1000 seeds") {
  const PhantomSpec spec;
  const double area = spec.size * spec.size;
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const PhantomPair p = generate_phantom(seed, spec);
    bool ok = p.healthy.height() == 64 && p.healthy.channels() == 2 && p.lesioned.same_shape(p.healthy);
    ok = ok && subset(p.lesion_mask, p.wm_mask);
    for (int y = 0; y < 64 && ok; ++y)
      for (int x = 0; x < 64; ++x)
        for (int c = 0; c < 2; ++c) {
          const double h = p.healthy.at(y, x, c), l = p.lesioned.at(y, x, c);
          if (!p.lesion_mask.at(y, x) && h != l) ok = false;
          if (h < 0.0 || h > 1.0 || l < 0.0 || l > 1.0) ok = false;
        }
    const double frac = static_cast<double>(p.lesion_mask.count()) / area;
    ok = ok && frac >= 0.001 && frac <= 0.10;
    // contrast polarity against surrounding white matter
    const auto in = region_stats(p.lesioned, p.lesion_mask);
    const auto ring = region_stats(p.lesioned, wm_ring(p.lesion_mask, p.wm_mask));
    ok = ok && in.mean[0] < ring.mean[0] && in.mean[1] > ring.mean[1];
    if (!ok) {
      ++failures;
      MESSAGE("seed " << seed << " violates a phantom invariant");
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("phantoms are deterministic") {
  const PhantomSpec spec;
  const PhantomPair a = generate_phantom(123, spec), b = generate_phantom(123, spec);
  CHECK(a.healthy == b.healthy);
  CHECK(a.lesioned == b.lesioned);
  CHECK(a.lesion_mask == b.lesion_mask);
  CHECK(a.wm_mask == b.wm_mask);
  const PhantomPair c = generate_phantom(124, spec);
  CHECK(!(a.healthy == c.healthy));
  const PhantomPair clean = generate_phantom(123, spec, false);
  CHECK(clean.lesion_mask.empty());
  CHECK(clean.lesioned == clean.healthy);
}

TEST_CASE("corpus") {
  const PhantomSpec spec;
  const auto a = generate_corpus(100, 7, spec);
  const auto b = generate_corpus(100, 7, spec);
  REQUIRE(a.size() == 100);
  int free_count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].lesioned == b[i].lesioned);
    CHECK(a[i].lesion_mask == b[i].lesion_mask);
    if (a[i].lesion_mask.empty()) ++free_count;
  }
  CHECK(free_count == 20);

  PhantomSpec half = spec;
  half.lesion_free_fraction = 0.5;
  int n = 0;
  for (const auto& p : generate_corpus(9, 3, half)) n += p.lesion_mask.empty();
  CHECK(n == 5);  // round(4.5)
  CHECK_THROWS_AS(generate_corpus(0, 1, spec), ConfigError);
}

TEST_CASE("spec validation") {
  PhantomSpec s;
  CHECK_NOTHROW(s.validate());
  s.size = 8;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = PhantomSpec{};
  s.t1_delta = 0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = PhantomSpec{};
  s.flair_delta = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = PhantomSpec{};
  s.lesion_count_min = 5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = PhantomSpec{};
  s.lesion_radius_max = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = PhantomSpec{};
  s.lesion_free_fraction = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS(generate_phantom(1, s), ConfigError);
}

TEST_CASE("wm_intersect") {
  Mask wm(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 3; ++x) wm.at(y, x) = 1;
  Mask inside(4, 4);
  inside.at(1, 1) = inside.at(2, 2) = 1;
  CHECK(wm_intersect(inside, wm) == inside);

  Mask far(4, 4);
  far.at(0, 3) = far.at(3, 3) = 1;
  CHECK(wm_intersect(far, wm).empty());

  Mask four(4, 4);
  four.at(0, 1) = four.at(0, 2) = four.at(1, 2) = four.at(1, 3) = 1;
  CHECK(four.count() == 4);
  CHECK(wm_intersect(four, wm).count() == 3);
  CHECK_THROWS_AS(wm_intersect(four, Mask(3, 4)), DimensionError);
}

TEST_CASE("gaussian blur preserves constants") {
  ImageGrid img(9, 7, 2, 0.25);
  const ImageGrid b = gaussian_blur(img, 1.5);
  for (double v : b.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}
