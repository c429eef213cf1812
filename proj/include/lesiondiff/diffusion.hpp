#pragma once

#include <optional>

#include "lesiondiff/image.hpp"
#include "lesiondiff/schedule.hpp"

// Forward-diffusion and single-step reverse kernels. All functions are pure.
namespace lesiondiff {

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
ImageGrid forward_diffuse(const ImageGrid& x0, int t, const ImageGrid& eps,
                          const NoiseSchedule& sched);

// x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) eps. Requires t >= 1.
ImageGrid one_step_forward(const ImageGrid& x_prev, int t, const ImageGrid& eps,
                           const NoiseSchedule& sched);

// Inverse of forward_diffuse given the noise: (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t).
ImageGrid estimate_x0(const ImageGrid& x_t, const ImageGrid& eps_hat, int t,
                      const NoiseSchedule& sched);

// Posterior variance of the ancestral step t -> t-1; zero at t = 1.
double ddpm_sigma2(int t, const NoiseSchedule& sched);

// Ancestral step: mean (x_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(1 - beta_t),
// plus sigma_t z.
ImageGrid ddpm_reverse_step(const ImageGrid& x_t, const ImageGrid& eps_hat, int t,
                            const ImageGrid& z, const NoiseSchedule& sched);

// Deterministic (eta = 0) DDIM update from t_cur to t_next < t_cur.
// The clean estimate is estimate_x0(x_cur, eps_hat, t_cur) unless `x0_override` is given.
ImageGrid ddim_reverse_step(const ImageGrid& x_cur, const ImageGrid& eps_hat, int t_cur,
                            int t_next, const NoiseSchedule& sched,
                            const std::optional<ImageGrid>& x0_override = std::nullopt);

// DDIM variance for a step t_cur -> t_next at stochasticity eta.
double ddim_sigma2(int t_cur, int t_next, double eta, const NoiseSchedule& sched);

}  // namespace lesiondiff
