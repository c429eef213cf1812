#pragma once

#include <span>
#include <vector>

namespace lesiondiff {

// Forward-process noise schedule.
//
// alpha_bar is indexed 0..T with alpha_bar(0) == 1 (clean data); beta is
// indexed 1..T. Immutable after construction.
class NoiseSchedule {
 public:
  static constexpr double kDefaultOffset = 0.008;
  static constexpr double kMaxBeta = 0.999;

  // Cosine schedule: f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2), alpha_bar = f(t)/f(0),
  // with beta clipped at kMaxBeta and alpha_bar recomputed as the running product.
  static NoiseSchedule cosine(int steps, double offset = kDefaultOffset);

  int steps() const { return steps_; }
  double offset() const { return offset_; }

  double alpha_bar(int t) const;
  double beta(int t) const;

  std::span<const double> alpha_bar_table() const { return alpha_bar_; }

 private:
  NoiseSchedule() = default;

  int steps_ = 0;
  double offset_ = 0.0;
  std::vector<double> alpha_bar_;  // size T+1
  std::vector<double> beta_;       // size T+1, beta_[0] unused (0)
};

// Strictly increasing timesteps [tau_1, ..., tau_S] in [1, T]; tau_0 = 0 is implicit.
class StepSubsequence {
 public:
  // [stride, 2*stride, ...] with T appended when it is not a multiple of stride.
  static StepSubsequence every(int steps, int stride);

  std::span<const int> taus() const { return taus_; }
  int size() const { return static_cast<int>(taus_.size()); }
  int operator[](int i) const { return taus_[static_cast<std::size_t>(i)]; }

  // Index of `t` in the subsequence, or -1.
  int index_of(int t) const;
  bool contains(int t) const { return index_of(t) >= 0; }

 private:
  std::vector<int> taus_;
};

}  // namespace lesiondiff
