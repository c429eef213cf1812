#include "lesiondiff/diffusion.hpp"

#include <cmath>
#include <string>

#include "lesiondiff/errors.hpp"

namespace lesiondiff {
namespace {

void require_timestep(int t, int lo, const NoiseSchedule& sched, const char* what) {
  if (t < lo || t > sched.steps()) {
    throw DomainError(std::string(what) + ": timestep " + std::to_string(t) + " outside [" +
                      std::to_string(lo) + "," + std::to_string(sched.steps()) + "]");
  }
}

// out = a * x + b * y, elementwise.
ImageGrid axpby(double a, const ImageGrid& x, double b, const ImageGrid& y) {
  ImageGrid out(x.height(), x.width(), x.channels());
  auto o = out.data();
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xs[i] + b * ys[i];
  return out;
}

}  // namespace

ImageGrid forward_diffuse(const ImageGrid& x0, int t, const ImageGrid& eps,
                          const NoiseSchedule& sched) {
  require_same_shape(x0, eps, "forward_diffuse");
  require_timestep(t, 0, sched, "forward_diffuse");
  if (t == 0) return x0;
  const double ab = sched.alpha_bar(t);
  return axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

ImageGrid one_step_forward(const ImageGrid& x_prev, int t, const ImageGrid& eps,
                           const NoiseSchedule& sched) {
  require_same_shape(x_prev, eps, "one_step_forward");
  require_timestep(t, 1, sched, "one_step_forward");
  const double b = sched.beta(t);
  return axpby(std::sqrt(1.0 - b), x_prev, std::sqrt(b), eps);
}

ImageGrid estimate_x0(const ImageGrid& x_t, const ImageGrid& eps_hat, int t,
                      const NoiseSchedule& sched) {
  require_same_shape(x_t, eps_hat, "estimate_x0");
  require_timestep(t, 0, sched, "estimate_x0");
  if (t == 0) return x_t;
  const double ab = sched.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(ab);
  return axpby(inv, x_t, -std::sqrt(1.0 - ab) * inv, eps_hat);
}

double ddpm_sigma2(int t, const NoiseSchedule& sched) {
  require_timestep(t, 1, sched, "ddpm_sigma2");
  if (t == 1) return 0.0;
  return (1.0 - sched.alpha_bar(t - 1)) / (1.0 - sched.alpha_bar(t)) * sched.beta(t);
}

ImageGrid ddpm_reverse_step(const ImageGrid& x_t, const ImageGrid& eps_hat, int t,
                            const ImageGrid& z, const NoiseSchedule& sched) {
  require_same_shape(x_t, eps_hat, "ddpm_reverse_step");
  require_same_shape(x_t, z, "ddpm_reverse_step");
  require_timestep(t, 1, sched, "ddpm_reverse_step");
  const double b = sched.beta(t);
  const double ab = sched.alpha_bar(t);
  const double scale = 1.0 / std::sqrt(1.0 - b);
  const double eps_coef = b / std::sqrt(1.0 - ab);
  const double sigma = std::sqrt(ddpm_sigma2(t, sched));

  ImageGrid out(x_t.height(), x_t.width(), x_t.channels());
  auto o = out.data();
  auto xs = x_t.data();
  auto es = eps_hat.data();
  auto zs = z.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = scale * (xs[i] - eps_coef * es[i]);
    if (sigma > 0.0) o[i] += sigma * zs[i];
  }
  return out;
}

ImageGrid ddim_reverse_step(const ImageGrid& x_cur, const ImageGrid& eps_hat, int t_cur,
                            int t_next, const NoiseSchedule& sched,
                            const std::optional<ImageGrid>& x0_override) {
  require_same_shape(x_cur, eps_hat, "ddim_reverse_step");
  require_timestep(t_cur, 1, sched, "ddim_reverse_step");
  if (t_next < 0 || t_next >= t_cur) {
    throw DomainError("ddim_reverse_step: need 0 <= t_next < t_cur, got t_cur=" +
                      std::to_string(t_cur) + " t_next=" + std::to_string(t_next));
  }
  ImageGrid x0 = x0_override ? *x0_override : estimate_x0(x_cur, eps_hat, t_cur, sched);
  require_same_shape(x_cur, x0, "ddim_reverse_step override");
  if (t_next == 0) return x0;
  const double ab = sched.alpha_bar(t_next);
  return axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps_hat);
}

double ddim_sigma2(int t_cur, int t_next, double eta, const NoiseSchedule& sched) {
  require_timestep(t_cur, 1, sched, "ddim_sigma2");
  const double ab_cur = sched.alpha_bar(t_cur);
  const double ab_next = sched.alpha_bar(t_next);
  return eta * eta * (1.0 - ab_next) / (1.0 - ab_cur) * (1.0 - ab_cur / ab_next);
}

}  // namespace lesiondiff
