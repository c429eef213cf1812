#pragma once

#include <cstdint>
#include <vector>

#include "lesiondiff/image.hpp"

namespace lesiondiff {

// Parameters of the two-channel brain-like phantom generator. Channel 0 is
// T1-like (lesions dark), channel 1 FLAIR-like (lesions bright). Intensities are
// file-space [0,1].
struct PhantomSpec {
  int size = 64;
  double brain_radius_min = 0.34;  // semi-axes as a fraction of size
  double brain_radius_max = 0.44;
  double cortex_thickness_min = 0.06;
  double cortex_thickness_max = 0.09;
  double ventricle_radius_min = 0.04;
  double ventricle_radius_max = 0.07;
  int lesion_count_min = 1;
  int lesion_count_max = 4;
  double lesion_radius_min = 2.0;  // pixels
  double lesion_radius_max = 6.0;
  double t1_delta = -0.35;
  double flair_delta = 0.40;
  double noise_amplitude = 0.03;
  double smoothing = 1.0;  // Gaussian blur sigma in pixels
  int wm_erosion = 2;      // wm_mask excludes pixels this close to other tissue
  double lesion_free_fraction = 0.2;

  void validate() const;

  friend bool operator==(const PhantomSpec&, const PhantomSpec&) = default;
};

// Healthy and lesioned versions of one phantom. lesioned equals healthy outside
// lesion_mask, and lesion_mask is a subset of wm_mask.
struct PhantomPair {
  ImageGrid healthy;
  ImageGrid lesioned;
  Mask lesion_mask;
  Mask wm_mask;
  std::uint64_t seed = 0;
};

// Deterministic in (seed, spec). With `with_lesions` false the pair is lesion-free.
PhantomPair generate_phantom(std::uint64_t seed, const PhantomSpec& spec, bool with_lesions = true);

// n pairs with seeds derived from `seed`; round(n * lesion_free_fraction) of them,
// chosen by a seeded shuffle, are lesion-free.
std::vector<PhantomPair> generate_corpus(int n, std::uint64_t seed, const PhantomSpec& spec);

// Restricts a lesion mask (possibly from another subject) to a white-matter mask.
Mask wm_intersect(const Mask& lesion_mask, const Mask& wm_mask);

// Separable Gaussian blur of each channel with clamped borders.
ImageGrid gaussian_blur(const ImageGrid& image, double sigma);

}  // namespace lesiondiff
