#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "lesiondiff/image.hpp"
#include "lesiondiff/phantom.hpp"

namespace lesiondiff {

// 2|A n B| / (|A| + |B|); 1.0 when both masks are empty.
double dice(const Mask& a, const Mask& b);

struct SegmentThresholds {
  double hyper = 2.0;       // channel-1 (FLAIR-like) z-score must exceed this
  double hypo = 2.0;        // channel-0 (T1-like) z-score must be below -hypo
  int min_component = 3;    // smaller 8-connected components are discarded
};

// Toy lesion segmenter: white-matter pixels that are bright in channel 1 and dark
// in channel 0 relative to robust white-matter statistics (median, 1.4826 * MAD).
Mask toy_segment(const ImageGrid& image, const Mask& wm_mask, const SegmentThresholds& th = {});

// Per-channel mean and standard deviation over a mask.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::size_t pixels = 0;
};

ChannelStats region_stats(const ImageGrid& image, const Mask& region);

// White matter around `mask`: wm pixels farther than `inner` and at most `outer`
// pixels from it. Falls back to all wm pixels outside the inner band when empty.
Mask wm_ring(const Mask& mask, const Mask& wm_mask, int inner = 2, int outer = 6);

struct MetricsReport {
  std::optional<double> dice;
  std::vector<double> mae_in_mask;
  std::vector<double> psnr_in_mask;  // +infinity when the region is reproduced exactly
  double outside_mask_max_abs_diff = 0.0;
  std::size_t mask_pixels = 0;
  ChannelStats inside;
  ChannelStats wm_ring;
};

// Filling metrics: MAE/PSNR inside the lesion mask versus pair.healthy, and the largest
// change outside `repaint_mask` (default: the lesion mask) versus pair.lesioned.
MetricsReport fill_report(const ImageGrid& filled, const PhantomPair& pair,
                          const std::optional<Mask>& repaint_mask = std::nullopt);

// Synthesis metrics: dice between the toy segmentation of `synthetic` and `target_mask`.
MetricsReport synth_report(const ImageGrid& synthetic, const Mask& target_mask,
                           const Mask& wm_mask, const SegmentThresholds& th = {});

// Per-channel mean absolute error and PSNR (peak 1.0) over a mask.
void error_in_mask(const ImageGrid& a, const ImageGrid& b, const Mask& m, std::vector<double>& mae,
                   std::vector<double>& psnr);

// Largest |a - b| over pixels where m == 0.
double max_abs_diff_outside(const ImageGrid& a, const ImageGrid& b, const Mask& m);

}  // namespace lesiondiff
