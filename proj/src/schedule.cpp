#include "lesiondiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lesiondiff/errors.hpp"

namespace lesiondiff {

NoiseSchedule NoiseSchedule::cosine(int steps, double offset) {
  if (steps < 1) throw ConfigError("schedule: T must be >= 1, got " + std::to_string(steps));
  if (!(offset > 0.0 && offset < 1.0)) {
    throw ConfigError("schedule: cosine offset must lie in (0,1), got " + std::to_string(offset));
  }
  const auto f = [&](int t) {
    const double phase = ((static_cast<double>(t) / steps + offset) / (1.0 + offset)) *
                         std::numbers::pi / 2.0;
    const double c = std::cos(phase);
    return c * c;
  };

  NoiseSchedule s;
  s.steps_ = steps;
  s.offset_ = offset;
  s.alpha_bar_.assign(static_cast<std::size_t>(steps) + 1, 1.0);
  s.beta_.assign(static_cast<std::size_t>(steps) + 1, 0.0);

  const double f0 = f(0);
  double prev_raw = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double raw = f(t) / f0;
    s.beta_[t] = std::min(1.0 - raw / prev_raw, kMaxBeta);
    s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t]);
    prev_raw = raw;
  }
  return s;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps_) {
    throw DomainError("alpha_bar: timestep " + std::to_string(t) + " outside [0," +
                      std::to_string(steps_) + "]");
  }
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps_) {
    throw DomainError("beta: timestep " + std::to_string(t) + " outside [1," +
                      std::to_string(steps_) + "]");
  }
  return beta_[static_cast<std::size_t>(t)];
}

StepSubsequence StepSubsequence::every(int steps, int stride) {
  if (steps < 1) throw ConfigError("subsequence: T must be >= 1");
  if (stride < 1 || stride > steps) {
    throw ConfigError("subsequence: stride must lie in [1," + std::to_string(steps) + "], got " +
                      std::to_string(stride));
  }
  StepSubsequence seq;
  for (int t = stride; t <= steps; t += stride) seq.taus_.push_back(t);
  if (seq.taus_.back() != steps) seq.taus_.push_back(steps);
  return seq;
}

int StepSubsequence::index_of(int t) const {
  const auto it = std::lower_bound(taus_.begin(), taus_.end(), t);
  if (it == taus_.end() || *it != t) return -1;
  return static_cast<int>(it - taus_.begin());
}

}  // namespace lesiondiff
