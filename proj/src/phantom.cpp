#include "lesiondiff/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lesiondiff/errors.hpp"
#include "lesiondiff/rng.hpp"

namespace lesiondiff {
namespace {

enum Tissue : std::uint8_t { kBackground = 0, kGray = 1, kWhite = 2, kCsf = 3 };

struct Intensities {
  double t1[4];
  double flair[4];
};

struct Ellipse {
  double cx, cy, ax, ay, angle;

  // Squared normalized radius; < 1 inside.
  double rho2(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (c * dx + s * dy) / ax;
    const double v = (-s * dx + c * dy) / ay;
    return u * u + v * v;
  }
};

Mask erode(const Mask& m, int radius) {
  if (radius <= 0) return m;
  Mask out(m.height(), m.width());
  const int r2 = radius * radius;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(y, x)) continue;
      bool keep = true;
      for (int dy = -radius; dy <= radius && keep; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dy * dy + dx * dx > r2) continue;
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= m.height() || xx < 0 || xx >= m.width() || !m.at(yy, xx)) {
            keep = false;
            break;
          }
        }
      }
      out.at(y, x) = keep ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

void PhantomSpec::validate() const {
  if (size < 16) throw ConfigError("phantom: size must be >= 16");
  const auto range = [](double lo, double hi, const char* what) {
    if (!(lo > 0.0) || !(lo <= hi)) throw ConfigError(std::string("phantom: invalid range for ") + what);
  };
  range(brain_radius_min, brain_radius_max, "brain_radius");
  range(cortex_thickness_min, cortex_thickness_max, "cortex_thickness");
  range(ventricle_radius_min, ventricle_radius_max, "ventricle_radius");
  range(lesion_radius_min, lesion_radius_max, "lesion_radius");
  if (brain_radius_max > 0.49) throw ConfigError("phantom: brain_radius_max must be <= 0.49");
  if (lesion_count_min < 1 || lesion_count_max < lesion_count_min) {
    throw ConfigError("phantom: invalid lesion_count range");
  }
  if (!(t1_delta < 0.0)) throw ConfigError("phantom: t1_delta must be negative");
  if (!(flair_delta > 0.0)) throw ConfigError("phantom: flair_delta must be positive");
  if (noise_amplitude < 0.0) throw ConfigError("phantom: noise_amplitude must be >= 0");
  if (smoothing < 0.0) throw ConfigError("phantom: smoothing must be >= 0");
  if (wm_erosion < 0) throw ConfigError("phantom: wm_erosion must be >= 0");
  if (lesion_free_fraction < 0.0 || lesion_free_fraction > 1.0) {
    throw ConfigError("phantom: lesion_free_fraction must lie in [0,1]");
  }
}

ImageGrid gaussian_blur(const ImageGrid& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& k : kernel) k /= norm;

  const int h = image.height(), w = image.width(), channels = image.channels();
  ImageGrid tmp(h, w, channels);
  ImageGrid out(h, w, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<std::size_t>(i + radius)] * image.at(y, std::clamp(x + i, 0, w - 1), c);
        }
        tmp.at(y, x, c) = acc;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(std::clamp(y + i, 0, h - 1), x, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

PhantomPair generate_phantom(std::uint64_t seed, const PhantomSpec& spec, bool with_lesions) {
  spec.validate();
  Rng rng(seed);
  const int n = spec.size;
  const double size = n;

  // Tissue contrast: T1-like has bright WM, FLAIR-like has GM brighter than WM, CSF dark in both.
  Intensities base{{0.02, 0.50, 0.78, 0.18}, {0.02, 0.62, 0.42, 0.10}};
  for (int k = 1; k < 4; ++k) {
    base.t1[k] += rng.uniform(-0.03, 0.03);
    base.flair[k] += rng.uniform(-0.03, 0.03);
  }

  const double cx = 0.5 * (size - 1) + rng.uniform(-1.5, 1.5);
  const double cy = 0.5 * (size - 1) + rng.uniform(-1.5, 1.5);
  const Ellipse brain{cx, cy, size * rng.uniform(spec.brain_radius_min, spec.brain_radius_max),
                      size * rng.uniform(spec.brain_radius_min, spec.brain_radius_max),
                      rng.uniform(-0.2, 0.2)};
  const double thickness = size * rng.uniform(spec.cortex_thickness_min, spec.cortex_thickness_max);
  const Ellipse white{cx, cy, brain.ax - thickness, brain.ay - thickness, brain.angle};
  const int folds = rng.uniform_int(5, 8);
  const double fold_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double fold_depth = rng.uniform(0.04, 0.08);

  const double vr = size * rng.uniform(spec.ventricle_radius_min, spec.ventricle_radius_max);
  const double vsep = vr * rng.uniform(0.9, 1.3);
  const double vy = cy + rng.uniform(-0.04, 0.02) * size;
  const Ellipse vent_l{cx - vsep, vy, 0.55 * vr, 1.6 * vr, rng.uniform(-0.3, 0.0)};
  const Ellipse vent_r{cx + vsep, vy, 0.55 * vr, 1.6 * vr, rng.uniform(0.0, 0.3)};

  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n) * n, kBackground);
  Mask white_region(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      std::uint8_t label = kBackground;
      if (brain.rho2(x, y) < 1.0) {
        label = kGray;
        const double theta = std::atan2(y - cy, x - cx);
        const double wobble = 1.0 + fold_depth * std::sin(folds * theta + fold_phase);
        if (white.rho2(x, y) < wobble * wobble) label = kWhite;
        if (vent_l.rho2(x, y) < 1.0 || vent_r.rho2(x, y) < 1.0) label = kCsf;
      }
      labels[static_cast<std::size_t>(y) * n + x] = label;
      white_region.at(y, x) = label == kWhite ? 1 : 0;
    }
  }

  ImageGrid tissue(n, n, 2);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const auto label = labels[static_cast<std::size_t>(y) * n + x];
      tissue.at(y, x, 0) = base.t1[label] + spec.noise_amplitude * rng.normal();
      tissue.at(y, x, 1) = base.flair[label] + spec.noise_amplitude * rng.normal();
    }
  }
  ImageGrid healthy = gaussian_blur(tissue, spec.smoothing);
  for (double& v : healthy.data()) v = std::clamp(v, 0.0, 1.0);

  PhantomPair pair;
  pair.seed = seed;
  pair.wm_mask = erode(white_region, spec.wm_erosion);
  pair.lesion_mask = Mask(n, n);
  pair.healthy = healthy;
  pair.lesioned = healthy;
  if (!with_lesions) return pair;

  std::vector<int> wm_pixels;
  for (int i = 0; i < n * n; ++i) {
    if (pair.wm_mask[static_cast<std::size_t>(i)]) wm_pixels.push_back(i);
  }
  if (wm_pixels.empty()) throw ConfigError("phantom: white-matter mask is empty for this spec");

  const std::size_t max_pixels = static_cast<std::size_t>(0.10 * n * n);
  const std::size_t min_pixels = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.001 * n * n)));
  const int count = rng.uniform_int(spec.lesion_count_min, spec.lesion_count_max);
  // Per-pixel lesion weight before rim smoothing.
  ImageGrid weight(n, n, 1);
  Mask lesions(n, n);
  int placed = 0;
  for (int attempt = 0; attempt < 200 && placed < count; ++attempt) {
    const int centre = wm_pixels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(wm_pixels.size()) - 1))];
    const double radius = rng.uniform(spec.lesion_radius_min, spec.lesion_radius_max);
    const Ellipse blob{static_cast<double>(centre % n), static_cast<double>(centre / n), radius,
                       radius * rng.uniform(0.6, 1.0), rng.uniform(0.0, std::numbers::pi)};
    const double strength = rng.uniform(0.85, 1.15);
    Mask candidate = lesions;
    std::vector<int> added;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (blob.rho2(x, y) <= 1.0 && pair.wm_mask.at(y, x) && !candidate.at(y, x)) {
          candidate.at(y, x) = 1;
          added.push_back(y * n + x);
        }
      }
    }
    if (added.size() < min_pixels || candidate.count() > max_pixels) continue;
    lesions = std::move(candidate);
    for (int p : added) weight.at(p / n, p % n, 0) = strength;
    ++placed;
  }
  if (placed == 0) throw ConfigError("phantom: could not place any lesion inside white matter");

  // Soft rims: blur the weights, then confine them to the mask so pixels outside it never change.
  const ImageGrid soft = gaussian_blur(weight, spec.smoothing);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (!lesions.at(y, x)) continue;
      const double w = weight.at(y, x, 0) * (0.5 + 0.5 * std::min(1.0, soft.at(y, x, 0)));
      pair.lesioned.at(y, x, 0) = std::clamp(healthy.at(y, x, 0) + spec.t1_delta * w, 0.0, 1.0);
      pair.lesioned.at(y, x, 1) = std::clamp(healthy.at(y, x, 1) + spec.flair_delta * w, 0.0, 1.0);
    }
  }
  pair.lesion_mask = std::move(lesions);
  return pair;
}

std::vector<PhantomPair> generate_corpus(int n, std::uint64_t seed, const PhantomSpec& spec) {
  if (n < 1) throw ConfigError("corpus: n must be >= 1");
  spec.validate();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0xC0));
  std::shuffle(order.begin(), order.end(), rng.engine());
  const int lesion_free = static_cast<int>(std::lround(spec.lesion_free_fraction * n));
  std::vector<bool> healthy_only(static_cast<std::size_t>(n), false);
  for (int i = 0; i < lesion_free; ++i) healthy_only[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

  std::vector<PhantomPair> corpus;
  corpus.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    corpus.push_back(generate_phantom(derive_seed(seed, static_cast<std::uint64_t>(i)), spec,
                                      !healthy_only[static_cast<std::size_t>(i)]));
  }
  return corpus;
}

Mask wm_intersect(const Mask& lesion_mask, const Mask& wm_mask) {
  if (!lesion_mask.same_shape(wm_mask)) throw DimensionError("wm_intersect: dimension mismatch");
  return intersect(lesion_mask, wm_mask);
}

}  // namespace lesiondiff
