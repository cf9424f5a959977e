#include "ndiff/forward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ndiff/kernels.hpp"
#include "ndiff/metrics.hpp"

namespace ndiff {

NoiseSchedule::NoiseSchedule(int q, int p, int steps, double epsilon) : q_(q), p_(p), steps_(steps), epsilon_(epsilon) {
  check_alphabet(p);
  if (q < 1) throw std::invalid_argument("NoiseSchedule: q must be >= 1");
  if (steps < 0) throw std::invalid_argument("NoiseSchedule: steps must be >= 0");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("NoiseSchedule: epsilon must be in [0, 1]");
}

NoiseSchedule NoiseSchedule::from_sweeps(int q, int p, int sweeps, double epsilon) {
  if (sweeps < 0) throw std::invalid_argument("NoiseSchedule: sweeps must be >= 0");
  return NoiseSchedule(q, p, sweeps * q, epsilon);
}

int NoiseSchedule::coordinate_at(int n) const {
  if (n < 0 || n >= steps_)
    throw std::out_of_range("step " + std::to_string(n) + " outside [0, " + std::to_string(steps_) + ")");
  return n % q_ + 1;
}

int coordinate_at(const NoiseSchedule& schedule, int n) { return schedule.coordinate_at(n); }

std::vector<double> forward_kernel_row(const NoiseSchedule& schedule, int n, std::span<const Symbol> from) {
  check_config(from, schedule.q(), schedule.p());
  const int u = schedule.coordinate_at(n);
  std::vector<double> row(static_cast<std::size_t>(schedule.p()), schedule.a());
  row[from[u - 1]] = schedule.b();
  return row;
}

void noise_step_inplace(std::span<Symbol> config, int n, const NoiseSchedule& schedule, Rng& rng) {
  const int u = schedule.coordinate_at(n);
  // Draw order is fixed (keep-coin first) so trajectories are reproducible.
  if (uniform01(rng) >= schedule.epsilon()) config[u - 1] = uniform_below(rng, schedule.p());
}

Configuration noise_step(std::span<const Symbol> config, int n, const NoiseSchedule& schedule, Rng& rng) {
  check_config(config, schedule.q(), schedule.p());
  Configuration out(config.begin(), config.end());
  noise_step_inplace(out, n, schedule, rng);
  return out;
}

std::vector<Configuration> noise_trajectory(std::span<const Symbol> config, int steps, const NoiseSchedule& schedule,
                                            Rng& rng) {
  check_config(config, schedule.q(), schedule.p());
  if (steps < 0 || steps > schedule.steps()) throw std::invalid_argument("noise_trajectory: steps must be in [0, T]");
  std::vector<Configuration> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  traj.emplace_back(config.begin(), config.end());
  for (int s = 0; s < steps; ++s) {
    Configuration next = traj.back();
    noise_step_inplace(next, s, schedule, rng);
    traj.push_back(std::move(next));
  }
  return traj;
}

ExactDistribution push_forward_exact(const ExactDistribution& mu_n, const NoiseSchedule& schedule, int n,
                                     int guard_bits) {
  if (mu_n.q() != schedule.q() || mu_n.p() != schedule.p())
    throw std::invalid_argument("push_forward_exact: distribution does not match the schedule");
  check_guard(mu_n.q(), mu_n.p(), guard_bits);
  const int u = schedule.coordinate_at(n);
  auto out = kernels::push_forward_table(mu_n.probs(), mu_n.q(), mu_n.p(), u, schedule.a(), schedule.b());
  return ExactDistribution::from_weights(mu_n.q(), mu_n.p(), std::move(out));
}

std::vector<ExactDistribution> forward_marginals(const ExactDistribution& mu0, const NoiseSchedule& schedule,
                                                 int guard_bits) {
  std::vector<ExactDistribution> out;
  out.reserve(static_cast<std::size_t>(schedule.steps()) + 1);
  out.push_back(mu0);
  for (int n = 0; n < schedule.steps(); ++n) out.push_back(push_forward_exact(out.back(), schedule, n, guard_bits));
  return out;
}

double mixing_tv(const ExactDistribution& mu0, const NoiseSchedule& schedule, int guard_bits) {
  ExactDistribution mu = mu0;
  for (int n = 0; n < schedule.steps(); ++n) mu = push_forward_exact(mu, schedule, n, guard_bits);
  return tv(mu, ExactDistribution::uniform(mu.q(), mu.p(), guard_bits));
}

double mixing_tv(const GibbsModel& model, const NoiseSchedule& schedule, int guard_bits) {
  return mixing_tv(exact_distribution(model, guard_bits), schedule, guard_bits);
}

}  // namespace ndiff
