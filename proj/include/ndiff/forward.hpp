#pragma once

// Round-robin forward noising. Kernel k_n (n = 0..T-1) maps mu_n to mu_{n+1}
// and touches only site u = (n mod q) + 1: the site keeps its symbol with
// probability epsilon, otherwise it is redrawn uniformly from the alphabet.

#include <span>
#include <vector>

#include "ndiff/core.hpp"
#include "ndiff/models.hpp"
#include "ndiff/rng.hpp"

namespace ndiff {

class NoiseSchedule {
 public:
  NoiseSchedule(int q, int p, int steps, double epsilon);

  // T = sweeps * q.
  static NoiseSchedule from_sweeps(int q, int p, int sweeps, double epsilon);

  int q() const { return q_; }
  int p() const { return p_; }
  int steps() const { return steps_; }
  double epsilon() const { return epsilon_; }
  // Probability of moving to each particular other symbol.
  double a() const { return (1.0 - epsilon_) / p_; }
  // Probability of keeping the current symbol.
  double b() const { return (1.0 - epsilon_) / p_ + epsilon_; }

  // 1-based site noised by kernel n; throws std::out_of_range unless 0 <= n < T.
  int coordinate_at(int n) const;

  bool operator==(const NoiseSchedule&) const = default;

 private:
  int q_;
  int p_;
  int steps_;
  double epsilon_;
};

int coordinate_at(const NoiseSchedule& schedule, int n);

// Entry r is k_n(from with site u set to r | from); other states get zero.
std::vector<double> forward_kernel_row(const NoiseSchedule& schedule, int n, std::span<const Symbol> from);

void noise_step_inplace(std::span<Symbol> config, int n, const NoiseSchedule& schedule, Rng& rng);
Configuration noise_step(std::span<const Symbol> config, int n, const NoiseSchedule& schedule, Rng& rng);

// Element s is the state after s kernels (k_0 .. k_{s-1}).
std::vector<Configuration> noise_trajectory(std::span<const Symbol> config, int steps, const NoiseSchedule& schedule,
                                            Rng& rng);

ExactDistribution push_forward_exact(const ExactDistribution& mu_n, const NoiseSchedule& schedule, int n,
                                     int guard_bits = kDefaultGuardBits);

// mu_0 .. mu_T.
std::vector<ExactDistribution> forward_marginals(const ExactDistribution& mu0, const NoiseSchedule& schedule,
                                                 int guard_bits = kDefaultGuardBits);

// TV between the T-step pushforward of the model's law and the uniform law.
double mixing_tv(const GibbsModel& model, const NoiseSchedule& schedule, int guard_bits = kDefaultGuardBits);
double mixing_tv(const ExactDistribution& mu0, const NoiseSchedule& schedule, int guard_bits = kDefaultGuardBits);

}  // namespace ndiff
