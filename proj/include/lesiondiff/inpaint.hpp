#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lesiondiff/denoiser.hpp"
#include "lesiondiff/image.hpp"
#include "lesiondiff/rng.hpp"
#include "lesiondiff/schedule.hpp"

namespace lesiondiff {

enum class SamplerMode { ddpm, ddim };

std::string to_string(SamplerMode mode);
SamplerMode parse_sampler_mode(const std::string& s);

struct SamplerConfig {
  SamplerMode mode = SamplerMode::ddim;
  int stride = 10;
  int repaint_reps = 2;
  // Refinement timestep tau_I; must belong to the stride subsequence.
  std::optional<int> refine_timestep = 100;
  std::uint64_t seed = 0;
  // Radius of the disk dilation that turns a lesion mask into M_repaint (filling only).
  int mask_dilation = 1;
  // Clamp DDIM clean-image estimates to the model-space range [-1, 1].
  bool clip_x0 = true;

  void validate(const NoiseSchedule& sched) const;
};

// x0 is in model space. For filling m_target is all-zero; for synthesis it equals m_repaint.
struct InpaintRequest {
  ImageGrid x0;
  Mask m_repaint;
  Mask m_target;
  SamplerConfig config;
};

// x_hat inside the mask, x_known outside.
ImageGrid repaint_mix(const ImageGrid& x_hat, const ImageGrid& x_known, const Mask& m);

// Ancestral repaint over all T steps with r repetitions per step, then the optional
// refinement pass. Pixels outside m_repaint equal req.x0 exactly.
ImageGrid ddpm_inpaint(const InpaintRequest& req, const Denoiser& model, const NoiseSchedule& sched);

// Deterministic DDIM repaint over the stride subsequence, mixing the clean estimate with
// the known image at every step, then the optional refinement pass.
ImageGrid ddim_inpaint(const InpaintRequest& req, const Denoiser& model, const NoiseSchedule& sched);

// Dispatches on req.config.mode.
ImageGrid inpaint(const InpaintRequest& req, const Denoiser& model, const NoiseSchedule& sched);

// Re-noises x0_hat to tau_i and runs the DDIM prefix of `seq` back to 0, mixing the
// clean estimate with x0_known at each step. One denoiser call per prefix element.
ImageGrid refine(const ImageGrid& x0_hat, const ImageGrid& x0_known, const Mask& m_repaint,
                 const Mask& m_target, int tau_i, const StepSubsequence& seq,
                 const Denoiser& model, const NoiseSchedule& sched, Rng& rng, bool clip_x0 = true);

// Lesion filling on a file-space image: M_repaint = dilate(lesion_mask), M_target = 0.
// Returns a file-space image identical to `image` outside M_repaint.
ImageGrid fill_lesions(const ImageGrid& image, const Mask& lesion_mask, const SamplerConfig& config,
                       const Denoiser& model, const NoiseSchedule& sched);

// Lesion synthesis on a file-space image: M_repaint = M_target = target_mask.
ImageGrid synthesize_lesions(const ImageGrid& image, const Mask& target_mask,
                             const SamplerConfig& config, const Denoiser& model,
                             const NoiseSchedule& sched);

// Unconditional ancestral sampling from pure noise.
ImageGrid sample_ddpm(const Denoiser& model, const NoiseSchedule& sched, const Mask& m_target,
                      int channels, Rng& rng);

// Unconditional deterministic DDIM sampling over `seq` (no clipping).
ImageGrid sample_ddim(const Denoiser& model, const NoiseSchedule& sched, const StepSubsequence& seq,
                      const Mask& m_target, int channels, Rng& rng);

}  // namespace lesiondiff
