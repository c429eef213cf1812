#include <cmath>

#include "doctest.h"
#include "grad_check.hpp"
#include "lesiondiff/denoiser.hpp"
#include "lesiondiff/errors.hpp"
#include "lesiondiff/inpaint.hpp"

using namespace lesiondiff;

namespace {

Mask block(int h, int w, int y0, int x0, int bh, int bw) {
  Mask m(h, w);
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) m.at(y, x) = 1;
  return m;
}

bool equal_outside(const ImageGrid& a, const ImageGrid& b, const Mask& m) {
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < a.channels(); ++c)
        if (!m.at(y, x) && a.at(y, x, c) != b.at(y, x, c)) return false;
  return true;
}

bool differ_inside(const ImageGrid& a, const ImageGrid& b, const Mask& m) {
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < a.channels(); ++c)
        if (m.at(y, x) && a.at(y, x, c) != b.at(y, x, c)) return true;
  return false;
}

struct Moments {
  double mean = 0.0, var = 0.0;
  std::size_t n = 0;
};

void accumulate(std::vector<double>& values, const ImageGrid& img, const Mask& m) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (m.at(y, x))
        for (int c = 0; c < img.channels(); ++c) values.push_back(img.at(y, x, c));
}

Moments moments(const std::vector<double>& v) {
  Moments r;
  r.n = v.size();
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(r.n);
  for (double x : v) r.var += (x - r.mean) * (x - r.mean);
  r.var /= static_cast<double>(r.n - 1);
  return r;
}

SamplerConfig config(SamplerMode mode, int reps, std::optional<int> refine, std::uint64_t seed) {
  SamplerConfig c;
  c.mode = mode;
  c.repaint_reps = reps;
  c.refine_timestep = refine;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("repaint_mix") {
  Rng rng(1);
  const ImageGrid a = rng.normal_image(4, 4, 2), b = rng.normal_image(4, 4, 2);
  CHECK(repaint_mix(a, b, Mask(4, 4, 1)) == a);
  CHECK(repaint_mix(a, b, Mask(4, 4, 0)) == b);
  ImageGrid p(1, 1, 1, 0.2), q(1, 1, 1, 0.8);
  CHECK(repaint_mix(p, q, Mask(1, 1, 1)).data()[0] == 0.2);
  const Mask m = block(4, 4, 1, 1, 2, 2);
  const ImageGrid mix = repaint_mix(a, b, m);
  CHECK(equal_outside(mix, b, m));
  CHECK(!differ_inside(mix, a, m));
  CHECK_THROWS_AS(repaint_mix(a, rng.normal_image(4, 3, 2), Mask(4, 4)), DimensionError);
  CHECK_THROWS_AS(repaint_mix(a, b, Mask(3, 4)), DimensionError);
}

TEST_CASE("empty repaint mask returns the input") {
  const auto s = NoiseSchedule::cosine(100);
  const GaussianOracle oracle(s, {0.0}, {1.0});
  Rng rng(2);
  const ImageGrid x0 = rng.normal_image(6, 6, 2);
  for (auto mode : {SamplerMode::ddpm, SamplerMode::ddim}) {
    InpaintRequest req{x0, Mask(6, 6), Mask(6, 6), config(mode, 2, 50, 1)};
    CHECK(inpaint(req, oracle, s) == x0);
  }
  const auto seq = StepSubsequence::every(100, 10);
  CHECK(refine(rng.normal_image(6, 6, 2), x0, Mask(6, 6), Mask(6, 6), 50, seq, oracle, s, rng) == x0);
  ImageGrid file(6, 6, 2, 0.4);
  CHECK(fill_lesions(file, Mask(6, 6), config(SamplerMode::ddim, 2, 50, 1), oracle, s) == file);
  CHECK(synthesize_lesions(file, Mask(6, 6), config(SamplerMode::ddim, 2, 50, 1), oracle, s) == file);
}

TEST_CASE("outside pixels are preserved bit-exactly") {
  const auto s = NoiseSchedule::cosine(100);
  const GaussianOracle oracle(s, {0.1, -0.1}, {0.6, 0.4});
  const NetworkDenoiser net(Network<float>(lesiondiff::testing::tiny_unet({4, 8}, 1, 2, 8), 3), s);
  Rng rng(3);
  int k = 0;
  for (const Denoiser* model : {static_cast<const Denoiser*>(&oracle), static_cast<const Denoiser*>(&net)}) {
    for (auto mode : {SamplerMode::ddpm, SamplerMode::ddim}) {
      for (std::optional<int> refine : {std::optional<int>{}, std::optional<int>{30}}) {
        for (int r : {1, 2}) {
          ImageGrid file(8, 8, 2);
          for (double& v : file.data()) v = rng.uniform();
          const Mask lesion = block(8, 8, 2 + k % 3, 1 + k % 4, 3, 2);
          const auto cfg = config(mode, r, refine, 100 + k++);
          const ImageGrid filled = fill_lesions(file, lesion, cfg, *model, s);
          CHECK(equal_outside(filled, file, dilate(lesion, cfg.mask_dilation)));
          const ImageGrid synth = synthesize_lesions(file, lesion, cfg, *model, s);
          CHECK(equal_outside(synth, file, lesion));
          CHECK(differ_inside(synth, file, lesion));
          for (double v : synth.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
          }
        }
      }
    }
  }
}

TEST_CASE("denoiser call accounting") {
  const auto s = NoiseSchedule::cosine(1000);
  const GaussianOracle oracle(s, {0.0}, {1.0});
  CountingDenoiser counter(oracle);
  Rng rng(4);
  const ImageGrid x0 = rng.normal_image(4, 4, 2);
  const Mask m = block(4, 4, 1, 1, 2, 2);

  InpaintRequest req{x0, m, Mask(4, 4), config(SamplerMode::ddim, 2, std::nullopt, 1)};
  ddim_inpaint(req, counter, s);
  CHECK(counter.calls() == 200);

  counter.reset();
  req.config.refine_timestep = 100;
  ddim_inpaint(req, counter, s);
  CHECK(counter.calls() == 210);

  counter.reset();
  req.config = config(SamplerMode::ddim, 3, std::nullopt, 1);
  req.config.stride = 50;
  ddim_inpaint(req, counter, s);
  CHECK(counter.calls() == 60);

  counter.reset();
  req.config = config(SamplerMode::ddpm, 2, std::nullopt, 1);
  ddpm_inpaint(req, counter, s);
  CHECK(counter.calls() == 2000);

  const auto seq = StepSubsequence::every(1000, 10);
  counter.reset();
  refine(x0, x0, m, Mask(4, 4), 10, seq, counter, s, rng);
  CHECK(counter.calls() == 1);
  counter.reset();
  refine(x0, x0, m, Mask(4, 4), 100, seq, counter, s, rng);
  CHECK(counter.calls() == 10);
  CHECK_THROWS_AS(refine(x0, x0, m, Mask(4, 4), 15, seq, counter, s, rng), ConfigError);
}

TEST_CASE("sampler config validation") {
  const auto s = NoiseSchedule::cosine(1000);
  SamplerConfig c;
  CHECK(c.mode == SamplerMode::ddim);
  CHECK(c.stride == 10);
  CHECK(c.repaint_reps == 2);
  CHECK(c.refine_timestep == 100);
  CHECK(c.mask_dilation == 1);
  CHECK_NOTHROW(c.validate(s));
  c.repaint_reps = 0;
  CHECK_THROWS_AS(c.validate(s), ConfigError);
  c = SamplerConfig{};
  c.refine_timestep = 105;
  CHECK_THROWS_AS(c.validate(s), ConfigError);
  c = SamplerConfig{};
  c.stride = 0;
  CHECK_THROWS_AS(c.validate(s), ConfigError);
  CHECK_THROWS_AS(parse_sampler_mode("euler"), ConfigError);
  CHECK(parse_sampler_mode("ddpm") == SamplerMode::ddpm);
  CHECK(to_string(SamplerMode::ddim) == "ddim");
}

TEST_CASE("seed determinism and repetition effect") {
  const auto s = NoiseSchedule::cosine(200);
  const GaussianOracle oracle(s, {0.0}, {0.5});
  Rng rng(5);
  const ImageGrid x0 = rng.normal_image(6, 6, 2);
  const Mask m = block(6, 6, 1, 1, 3, 3);
  for (auto mode : {SamplerMode::ddpm, SamplerMode::ddim}) {
    InpaintRequest a{x0, m, Mask(6, 6), config(mode, 1, std::nullopt, 9)};
    InpaintRequest b = a;
    b.config.repaint_reps = 2;
    InpaintRequest c = a;
    c.config.seed = 10;
    const ImageGrid ra = inpaint(a, oracle, s);
    CHECK(ra == inpaint(a, oracle, s));
    CHECK(differ_inside(ra, inpaint(b, oracle, s), m));
    CHECK(differ_inside(ra, inpaint(c, oracle, s), m));
  }
}

TEST_CASE("masked-region content depends only on conditioning") {
  const auto s = NoiseSchedule::cosine(100);
  const NetworkDenoiser net(Network<float>(lesiondiff::testing::tiny_unet({4, 8}, 1, 2, 8), 6), s);
  Rng rng(6);
  ImageGrid x0 = rng.normal_image(8, 8, 2);
  const Mask m = block(8, 8, 2, 2, 4, 4);
  InpaintRequest req{x0, m, Mask(8, 8), config(SamplerMode::ddim, 2, 20, 4)};
  req.config.clip_x0 = false;
  const ImageGrid base = inpaint(req, net, s);

  InpaintRequest changed_target = req;
  changed_target.m_target = m;
  const ImageGrid t = inpaint(changed_target, net, s);
  CHECK(equal_outside(t, base, m));
  CHECK(differ_inside(t, base, m));

  InpaintRequest changed_inside = req;
  changed_inside.x0.at(3, 3, 0) += 5.0;
  const ImageGrid u = inpaint(changed_inside, net, s);
  CHECK(equal_outside(u, base, m));
}

TEST_CASE("ddpm inpainting samples the prior inside the mask") {
  const auto s = NoiseSchedule::cosine(1000);
  const double mu = 0.2, sd = 0.8;
  const GaussianOracle oracle(s, {mu}, {sd});
  const Mask m = block(16, 16, 4, 4, 8, 8);
  std::vector<double> values;
  for (int seed = 0; seed < 40; ++seed) {
    Rng rng(1000 + seed);
    ImageGrid x0 = rng.normal_image(16, 16, 2);
    InpaintRequest req{x0, m, Mask(16, 16), config(SamplerMode::ddpm, 2, std::nullopt, static_cast<std::uint64_t>(seed))};
    req.config.clip_x0 = false;
    const ImageGrid out = ddpm_inpaint(req, oracle, s);
    CHECK(equal_outside(out, x0, m));
    accumulate(values, out, m);
  }
  const Moments mo = moments(values);
  const double n = static_cast<double>(mo.n);
  CHECK(std::abs(mo.mean - mu) <= 3.0 * sd / std::sqrt(n));
  CHECK(std::abs(mo.var - sd * sd) <= 3.0 * sd * sd * std::sqrt(2.0 / n));
}

TEST_CASE("ddim and ddpm inpainting agree in mean under a perfect oracle") {
  const auto s = NoiseSchedule::cosine(1000);
  const double mu = 0.4, sd = 0.6;
  const GaussianOracle oracle(s, {mu, -mu}, {sd, sd});
  const Mask m = block(6, 6, 1, 1, 4, 4);
  std::vector<double> ddpm_v, ddim_v;
  for (int seed = 0; seed < 200; ++seed) {
    Rng rng(5000 + seed);
    const ImageGrid x0 = rng.normal_image(6, 6, 2);
    InpaintRequest req{x0, m, Mask(6, 6), config(SamplerMode::ddpm, 1, std::nullopt, static_cast<std::uint64_t>(seed))};
    req.config.clip_x0 = false;
    const ImageGrid a = ddpm_inpaint(req, oracle, s);
    req.config.mode = SamplerMode::ddim;
    const ImageGrid b = ddim_inpaint(req, oracle, s);
    // fold channel means together by removing the known per-channel prior mean
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x)
        if (m.at(y, x)) {
          ddpm_v.push_back(a.at(y, x, 0) - mu);
          ddpm_v.push_back(a.at(y, x, 1) + mu);
          ddim_v.push_back(b.at(y, x, 0) - mu);
          ddim_v.push_back(b.at(y, x, 1) + mu);
        }
  }
  const Moments p = moments(ddpm_v), d = moments(ddim_v);
  const double se = std::sqrt(p.var / p.n + d.var / d.n);
  CHECK(std::abs(p.mean - d.mean) <= 3.0 * se);
}
