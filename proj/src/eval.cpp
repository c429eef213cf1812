#include "lesiondiff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lesiondiff/errors.hpp"

namespace lesiondiff {
namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

void remove_small_components(Mask& m, int min_size) {
  if (min_size <= 1) return;
  const int h = m.height(), w = m.width();
  std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
  std::vector<int> stack, members;
  for (int start = 0; start < h * w; ++start) {
    if (!m[static_cast<std::size_t>(start)] || label[static_cast<std::size_t>(start)] >= 0) continue;
    members.clear();
    stack.assign(1, start);
    label[static_cast<std::size_t>(start)] = start;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int py = p / w, px = p % w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int y = py + dy, x = px + dx;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          const int q = y * w + x;
          if (m[static_cast<std::size_t>(q)] && label[static_cast<std::size_t>(q)] < 0) {
            label[static_cast<std::size_t>(q)] = start;
            stack.push_back(q);
          }
        }
      }
    }
    if (static_cast<int>(members.size()) < min_size) {
      for (int p : members) m[static_cast<std::size_t>(p)] = 0;
    }
  }
}

}  // namespace

double dice(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw DimensionError("dice: dimension mismatch");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
    both += a[i] & b[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

Mask toy_segment(const ImageGrid& image, const Mask& wm_mask, const SegmentThresholds& th) {
  require_matches(wm_mask, image, "toy_segment");
  if (image.channels() != 2) throw DimensionError("toy_segment: expected a 2-channel image");
  if (wm_mask.empty()) throw ConfigError("toy_segment: empty white-matter mask");

  double centre[2], scale[2];
  for (int c = 0; c < 2; ++c) {
    std::vector<double> values;
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        if (wm_mask.at(y, x)) values.push_back(image.at(y, x, c));
      }
    }
    centre[c] = median(values);
    for (double& v : values) v = std::abs(v - centre[c]);
    scale[c] = 1.4826 * median(values);
  }
  const auto z = [&](double v, int c) {
    const double d = v - centre[c];
    if (scale[c] > 0.0) return d / scale[c];
    if (d == 0.0) return 0.0;
    return d > 0.0 ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
  };

  Mask out(image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!wm_mask.at(y, x)) continue;
      if (z(image.at(y, x, 1), 1) > th.hyper && z(image.at(y, x, 0), 0) < -th.hypo) out.at(y, x) = 1;
    }
  }
  remove_small_components(out, th.min_component);
  return out;
}

ChannelStats region_stats(const ImageGrid& image, const Mask& region) {
  require_matches(region, image, "region_stats");
  ChannelStats s;
  s.mean.assign(static_cast<std::size_t>(image.channels()), 0.0);
  s.std.assign(static_cast<std::size_t>(image.channels()), 0.0);
  s.pixels = region.count();
  if (s.pixels == 0) return s;
  for (int c = 0; c < image.channels(); ++c) {
    double sum = 0.0, sq = 0.0;
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        if (!region.at(y, x)) continue;
        sum += image.at(y, x, c);
      }
    }
    const double mean = sum / static_cast<double>(s.pixels);
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        if (!region.at(y, x)) continue;
        const double d = image.at(y, x, c) - mean;
        sq += d * d;
      }
    }
    s.mean[static_cast<std::size_t>(c)] = mean;
    s.std[static_cast<std::size_t>(c)] = std::sqrt(sq / static_cast<double>(s.pixels));
  }
  return s;
}

Mask wm_ring(const Mask& mask, const Mask& wm_mask, int inner, int outer) {
  if (!mask.same_shape(wm_mask)) throw DimensionError("wm_ring: dimension mismatch");
  const Mask near = dilate(mask, inner);
  const Mask far = dilate(mask, outer);
  Mask ring(mask.height(), mask.width());
  Mask fallback(mask.height(), mask.width());
  for (std::size_t i = 0; i < ring.size(); ++i) {
    ring[i] = wm_mask[i] && far[i] && !near[i];
    fallback[i] = wm_mask[i] && !near[i];
  }
  return ring.empty() ? fallback : ring;
}

void error_in_mask(const ImageGrid& a, const ImageGrid& b, const Mask& m, std::vector<double>& mae,
                   std::vector<double>& psnr) {
  require_same_shape(a, b, "error_in_mask");
  require_matches(m, a, "error_in_mask");
  const std::size_t n = m.count();
  mae.assign(static_cast<std::size_t>(a.channels()), 0.0);
  psnr.assign(static_cast<std::size_t>(a.channels()), std::numeric_limits<double>::infinity());
  if (n == 0) return;
  for (int c = 0; c < a.channels(); ++c) {
    double abs_sum = 0.0, sq_sum = 0.0;
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < a.width(); ++x) {
        if (!m.at(y, x)) continue;
        const double d = a.at(y, x, c) - b.at(y, x, c);
        abs_sum += std::abs(d);
        sq_sum += d * d;
      }
    }
    mae[static_cast<std::size_t>(c)] = abs_sum / static_cast<double>(n);
    const double mse = sq_sum / static_cast<double>(n);
    if (mse > 0.0) psnr[static_cast<std::size_t>(c)] = 10.0 * std::log10(1.0 / mse);
  }
}

double max_abs_diff_outside(const ImageGrid& a, const ImageGrid& b, const Mask& m) {
  require_same_shape(a, b, "max_abs_diff_outside");
  require_matches(m, a, "max_abs_diff_outside");
  double worst = 0.0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (m.at(y, x)) continue;
      for (int c = 0; c < a.channels(); ++c) worst = std::max(worst, std::abs(a.at(y, x, c) - b.at(y, x, c)));
    }
  }
  return worst;
}

MetricsReport fill_report(const ImageGrid& filled, const PhantomPair& pair,
                          const std::optional<Mask>& repaint_mask) {
  require_same_shape(filled, pair.healthy, "fill_report");
  MetricsReport r;
  const Mask& outside_ref = repaint_mask ? *repaint_mask : pair.lesion_mask;
  error_in_mask(filled, pair.healthy, pair.lesion_mask, r.mae_in_mask, r.psnr_in_mask);
  r.outside_mask_max_abs_diff = max_abs_diff_outside(filled, pair.lesioned, outside_ref);
  r.mask_pixels = pair.lesion_mask.count();
  r.inside = region_stats(filled, pair.lesion_mask);
  r.wm_ring = region_stats(filled, wm_ring(outside_ref, pair.wm_mask));
  return r;
}

MetricsReport synth_report(const ImageGrid& synthetic, const Mask& target_mask,
                           const Mask& wm_mask, const SegmentThresholds& th) {
  require_matches(target_mask, synthetic, "synth_report");
  MetricsReport r;
  r.dice = dice(toy_segment(synthetic, wm_mask, th), target_mask);
  r.mask_pixels = target_mask.count();
  r.inside = region_stats(synthetic, target_mask);
  r.wm_ring = region_stats(synthetic, wm_ring(target_mask, wm_mask));
  return r;
}

}  // namespace lesiondiff
