#include "lesiondiff/inpaint.hpp"

#include <algorithm>
#include <string>

#include "lesiondiff/diffusion.hpp"
#include "lesiondiff/errors.hpp"

namespace lesiondiff {
namespace {

void check_finite(const ImageGrid& x, const char* where, int t) {
  if (!x.all_finite()) {
    throw NumericalError(std::string(where) + ": non-finite state at timestep " + std::to_string(t));
  }
}

void validate_request(const InpaintRequest& req, const NoiseSchedule& sched) {
  req.config.validate(sched);
  require_matches(req.m_repaint, req.x0, "inpaint repaint mask");
  require_matches(req.m_target, req.x0, "inpaint target mask");
}

void clip_unit(ImageGrid& x) {
  for (double& v : x.data()) v = std::clamp(v, -1.0, 1.0);
}

// Clean estimate at tau, optionally clipped, mixed with the known image.
ImageGrid mixed_x0(const ImageGrid& x, const ImageGrid& eps, int tau, const ImageGrid& known,
                   const Mask& m, const NoiseSchedule& sched, bool clip) {
  ImageGrid x0 = estimate_x0(x, eps, tau, sched);
  if (clip) clip_unit(x0);
  return repaint_mix(x0, known, m);
}

ImageGrid finish(const ImageGrid& result, const InpaintRequest& req, const Denoiser& model,
                 const NoiseSchedule& sched, Rng& rng) {
  ImageGrid out = result;
  if (req.config.refine_timestep) {
    const auto seq = StepSubsequence::every(sched.steps(), req.config.stride);
    out = refine(out, req.x0, req.m_repaint, req.m_target, *req.config.refine_timestep, seq, model,
                 sched, rng, req.config.clip_x0);
  }
  return repaint_mix(out, req.x0, req.m_repaint);
}

// File-space result: generated pixels (clamped to [0,1]) inside m, the input elsewhere.
ImageGrid compose_file_space(const ImageGrid& generated_model, const ImageGrid& input,
                             const Mask& m) {
  ImageGrid out = input;
  for (int y = 0; y < input.height(); ++y) {
    for (int x = 0; x < input.width(); ++x) {
      if (!m.at(y, x)) continue;
      for (int c = 0; c < input.channels(); ++c) {
        out.at(y, x, c) = std::clamp((generated_model.at(y, x, c) + 1.0) * 0.5, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace

std::string to_string(SamplerMode mode) { return mode == SamplerMode::ddpm ? "ddpm" : "ddim"; }

SamplerMode parse_sampler_mode(const std::string& s) {
  if (s == "ddpm") return SamplerMode::ddpm;
  if (s == "ddim") return SamplerMode::ddim;
  throw ConfigError("unknown sampler mode '" + s + "' (expected ddpm or ddim)");
}

void SamplerConfig::validate(const NoiseSchedule& sched) const {
  if (repaint_reps < 1) throw ConfigError("sampler: repaint_reps must be >= 1");
  if (mask_dilation < 0) throw ConfigError("sampler: mask_dilation must be >= 0");
  const auto seq = StepSubsequence::every(sched.steps(), stride);
  if (refine_timestep && !seq.contains(*refine_timestep)) {
    throw ConfigError("sampler: refine timestep " + std::to_string(*refine_timestep) +
                      " is not in the stride-" + std::to_string(stride) + " subsequence");
  }
}

ImageGrid repaint_mix(const ImageGrid& x_hat, const ImageGrid& x_known, const Mask& m) {
  require_same_shape(x_hat, x_known, "repaint_mix");
  require_matches(m, x_hat, "repaint_mix");
  ImageGrid out = x_known;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (!m.at(y, x)) continue;
      for (int c = 0; c < out.channels(); ++c) out.at(y, x, c) = x_hat.at(y, x, c);
    }
  }
  return out;
}

ImageGrid ddpm_inpaint(const InpaintRequest& req, const Denoiser& model, const NoiseSchedule& sched) {
  validate_request(req, sched);
  if (req.m_repaint.empty()) return req.x0;
  const int r = req.config.repaint_reps;
  Rng rng(req.config.seed);

  ImageGrid x = rng.normal_like(req.x0);
  for (int t = sched.steps(); t >= 1; --t) {
    for (int rep = 1; rep <= r; ++rep) {
      const ImageGrid eps = model.predict_noise(x, req.m_target, t);
      const ImageGrid z = rng.normal_like(x);
      const ImageGrid x_hat = ddpm_reverse_step(x, eps, t, z, sched);
      const ImageGrid known = forward_diffuse(req.x0, t - 1, rng.normal_like(x), sched);
      ImageGrid mixed = repaint_mix(x_hat, known, req.m_repaint);
      check_finite(mixed, "ddpm_inpaint", t);
      x = rep < r ? one_step_forward(mixed, t, rng.normal_like(x), sched) : std::move(mixed);
    }
  }
  return finish(x, req, model, sched, rng);
}

ImageGrid ddim_inpaint(const InpaintRequest& req, const Denoiser& model, const NoiseSchedule& sched) {
  validate_request(req, sched);
  if (req.m_repaint.empty()) return req.x0;
  const int r = req.config.repaint_reps;
  const auto seq = StepSubsequence::every(sched.steps(), req.config.stride);
  Rng rng(req.config.seed);

  ImageGrid x = rng.normal_like(req.x0);
  for (int i = seq.size() - 1; i >= 0; --i) {
    const int tau = seq[i];
    const int next = i > 0 ? seq[i - 1] : 0;
    for (int rep = 1; rep <= r; ++rep) {
      const ImageGrid eps = model.predict_noise(x, req.m_target, tau);
      const ImageGrid x0p =
          mixed_x0(x, eps, tau, req.x0, req.m_repaint, sched, req.config.clip_x0);
      if (rep < r) {
        x = forward_diffuse(x0p, tau, rng.normal_like(x), sched);
      } else {
        x = ddim_reverse_step(x, eps, tau, next, sched, x0p);
      }
      check_finite(x, "ddim_inpaint", tau);
    }
  }
  return finish(x, req, model, sched, rng);
}

ImageGrid inpaint(const InpaintRequest& req, const Denoiser& model, const NoiseSchedule& sched) {
  return req.config.mode == SamplerMode::ddpm ? ddpm_inpaint(req, model, sched)
                                              : ddim_inpaint(req, model, sched);
}

ImageGrid refine(const ImageGrid& x0_hat, const ImageGrid& x0_known, const Mask& m_repaint,
                 const Mask& m_target, int tau_i, const StepSubsequence& seq,
                 const Denoiser& model, const NoiseSchedule& sched, Rng& rng, bool clip_x0) {
  require_same_shape(x0_hat, x0_known, "refine");
  require_matches(m_repaint, x0_hat, "refine repaint mask");
  require_matches(m_target, x0_hat, "refine target mask");
  const int start = seq.index_of(tau_i);
  if (start < 0) {
    throw ConfigError("refine: timestep " + std::to_string(tau_i) + " is not in the subsequence");
  }
  if (m_repaint.empty()) return x0_known;

  ImageGrid x = forward_diffuse(x0_hat, tau_i, rng.normal_like(x0_hat), sched);
  for (int i = start; i >= 0; --i) {
    const int tau = seq[i];
    const int next = i > 0 ? seq[i - 1] : 0;
    const ImageGrid eps = model.predict_noise(x, m_target, tau);
    const ImageGrid x0p = mixed_x0(x, eps, tau, x0_known, m_repaint, sched, clip_x0);
    x = ddim_reverse_step(x, eps, tau, next, sched, x0p);
    check_finite(x, "refine", tau);
  }
  return repaint_mix(x, x0_known, m_repaint);
}

ImageGrid fill_lesions(const ImageGrid& image, const Mask& lesion_mask, const SamplerConfig& config,
                       const Denoiser& model, const NoiseSchedule& sched) {
  require_matches(lesion_mask, image, "fill_lesions");
  config.validate(sched);
  const Mask repaint = dilate(lesion_mask, config.mask_dilation);
  if (repaint.empty()) return image;
  InpaintRequest req{to_model_space(image), repaint, Mask(image.height(), image.width()), config};
  return compose_file_space(inpaint(req, model, sched), image, repaint);
}

ImageGrid synthesize_lesions(const ImageGrid& image, const Mask& target_mask,
                             const SamplerConfig& config, const Denoiser& model,
                             const NoiseSchedule& sched) {
  require_matches(target_mask, image, "synthesize_lesions");
  config.validate(sched);
  if (target_mask.empty()) return image;
  InpaintRequest req{to_model_space(image), target_mask, target_mask, config};
  return compose_file_space(inpaint(req, model, sched), image, target_mask);
}

ImageGrid sample_ddpm(const Denoiser& model, const NoiseSchedule& sched, const Mask& m_target,
                      int channels, Rng& rng) {
  ImageGrid x = rng.normal_image(m_target.height(), m_target.width(), channels);
  for (int t = sched.steps(); t >= 1; --t) {
    const ImageGrid eps = model.predict_noise(x, m_target, t);
    x = ddpm_reverse_step(x, eps, t, rng.normal_like(x), sched);
    check_finite(x, "sample_ddpm", t);
  }
  return x;
}

ImageGrid sample_ddim(const Denoiser& model, const NoiseSchedule& sched, const StepSubsequence& seq,
                      const Mask& m_target, int channels, Rng& rng) {
  ImageGrid x = rng.normal_image(m_target.height(), m_target.width(), channels);
  for (int i = seq.size() - 1; i >= 0; --i) {
    const int tau = seq[i];
    const ImageGrid eps = model.predict_noise(x, m_target, tau);
    x = ddim_reverse_step(x, eps, tau, i > 0 ? seq[i - 1] : 0, sched);
    check_finite(x, "sample_ddim", tau);
  }
  return x;
}

}  // namespace lesiondiff
