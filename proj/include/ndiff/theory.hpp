#pragma once

// Brute-force checks of the reverse-chain TV bound
//   TV(mu_hat_0, mu_0) <= delta_T + T * eta + gamma
// where delta_T is the forward mixing error, eta the worst reverse-row error
// and gamma the TV of the initialization from uniform noise.

#include <cstdint>
#include <string>
#include <vector>

#include "ndiff/core.hpp"
#include "ndiff/forward.hpp"
#include "ndiff/models.hpp"

namespace ndiff {

inline constexpr double kBoundTolerance = 1e-10;

struct BoundReport {
  double lhs = 0.0;
  double delta_T = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  int steps = 0;
  double rhs = 0.0;  // delta_T + steps * eta + gamma
  bool holds = false;

  std::string to_json() const;
};

enum class PerturbationMode { MixWithUniform, RandomSimplexJitter };

std::string to_string(PerturbationMode mode);
PerturbationMode parse_perturbation_mode(const std::string& s);

// row' = (1 - m) row + m v, with v uniform (mix) or a Dirichlet(1) draw seeded
// per (seed, step, state) (jitter).
struct Perturbation {
  double magnitude = 0.0;
  std::uint64_t seed = 0;
  PerturbationMode mode = PerturbationMode::MixWithUniform;
};

void perturb_row(const Perturbation& perturbation, int n, StateIndex from_index, std::span<double> row);

// Exact reverse kernels from the forward marginals, each row perturbed, run
// from the uniform law.
BoundReport verify_error_bound(const GibbsModel& model, const NoiseSchedule& schedule,
                               const Perturbation& perturbation, int guard_bits = kDefaultGuardBits);
BoundReport verify_error_bound(const ExactDistribution& mu0, const NoiseSchedule& schedule,
                               const Perturbation& perturbation, int guard_bits = kDefaultGuardBits);

// Exact reverse kernels (eta = 0) run from the empirical law of
// `noise_samples` uniform draws.
BoundReport verify_init_error(const GibbsModel& model, const NoiseSchedule& schedule, std::size_t noise_samples,
                              std::uint64_t seed, int guard_bits = kDefaultGuardBits);
// Same with an explicit initial law.
BoundReport verify_init_error(const ExactDistribution& mu0, const NoiseSchedule& schedule,
                              const ExactDistribution& init, int guard_bits = kDefaultGuardBits);

struct MixReport {
  double lambda = 0.0;
  double max_marginal_error = 0.0;
};

struct DegenerateReport {
  int steps = 0;
  double canonical_max_error = 0.0;
  double degenerate_max_error = 0.0;
  std::vector<MixReport> mixes;
  // Mass moved over Hamming distance > 1 by the resampling kernel, averaged over steps.
  double nonlocal_mass = 0.0;

  std::string to_json() const;
};

// Compares the canonical reverse kernel with the kernel that ignores its input
// and resamples from mu_t, and with convex mixes lambda * canonical +
// (1 - lambda) * resampling. Dense p^q x p^q kernels; limited to 12 bits.
DegenerateReport degenerate_reverse_demo(const GibbsModel& model, const NoiseSchedule& schedule,
                                         const std::vector<double>& lambdas = {0.25, 0.5});

}  // namespace ndiff
