#pragma once

// Reverse-time kernels and samplers.
//
// For the round-robin forward chain, the Bayes reversal of k_n moves only site
// u = (n mod q) + 1. Starting from state x, the probability of landing on x
// with site u set to r is
//
//   w(r) / sum_r' w(r'),   w(r) = (r == x_u ? b : a) * mu_n(r | x_{-u}),
//
// so the reverse chain needs nothing beyond single-site conditionals of mu_n.

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "ndiff/core.hpp"
#include "ndiff/forward.hpp"
#include "ndiff/models.hpp"

namespace ndiff {

// Source of mu_n(sigma_u | sigma_{-u}). Implementations must be safe to call
// concurrently.
class ConditionalOracle {
 public:
  virtual ~ConditionalOracle() = default;

  virtual int q() const = 0;
  virtual int p() const = 0;
  virtual int steps() const = 0;

  // Writes the law of site u at step n given config with config[u-1] ignored.
  virtual void conditional(int n, int u, std::span<const Symbol> config, std::span<double> out) const = 0;

  std::vector<double> conditional(int n, int u, std::span<const Symbol> config) const;
};

// Conditionals read off exact forward marginals mu_0 .. mu_{T-1} (or more).
class ExactOracle final : public ConditionalOracle {
 public:
  explicit ExactOracle(std::vector<ExactDistribution> marginals);
  static ExactOracle from_model(const GibbsModel& model, const NoiseSchedule& schedule,
                                int guard_bits = kDefaultGuardBits);

  int q() const override { return marginals_.front().q(); }
  int p() const override { return marginals_.front().p(); }
  int steps() const override { return static_cast<int>(marginals_.size()); }
  const std::vector<ExactDistribution>& marginals() const { return marginals_; }

  using ConditionalOracle::conditional;
  void conditional(int n, int u, std::span<const Symbol> config, std::span<double> out) const override;

 private:
  std::vector<ExactDistribution> marginals_;
};

// Time-independent conditionals of a Gibbs model.
class ModelOracle final : public ConditionalOracle {
 public:
  ModelOracle(GibbsModel model, int steps);

  int q() const override { return num_sites(model_); }
  int p() const override { return alphabet_size(model_); }
  int steps() const override { return steps_; }

  using ConditionalOracle::conditional;
  void conditional(int n, int u, std::span<const Symbol> config, std::span<double> out) const override;

 private:
  GibbsModel model_;
  int steps_;
};

class UniformOracle final : public ConditionalOracle {
 public:
  UniformOracle(int q, int p, int steps) : q_(q), p_(p), steps_(steps) {}

  int q() const override { return q_; }
  int p() const override { return p_; }
  int steps() const override { return steps_; }

  using ConditionalOracle::conditional;
  void conditional(int, int, std::span<const Symbol>, std::span<double> out) const override;

 private:
  int q_;
  int p_;
  int steps_;
};

// Rows are indexed by the symbol placed at site u; all other states get zero.
std::vector<double> exact_reverse_kernel_row(const ExactDistribution& mu_n, const NoiseSchedule& schedule, int n,
                                             std::span<const Symbol> from);

std::vector<double> reverse_kernel_row_from_conditionals(const ConditionalOracle& oracle,
                                                         const NoiseSchedule& schedule, int n,
                                                         std::span<const Symbol> from);

// Core formula. If the normalizer falls below 1e-30 the row keeps the current
// symbol instead of dividing 0/0. Returns the normalizer.
double reverse_row_from_conditional(std::span<const double> cond, Symbol current, double a, double b,
                                    std::span<double> row);

struct ReverseDiagnostics {
  double max_row_sum_error = 0.0;
  double max_ratio = 0.0;  // largest mu(r | .) / mu(current | .) seen
  std::size_t floored_rows = 0;
  std::size_t rows = 0;
};

struct UniformInit {};
using ReverseInit =
    std::variant<UniformInit, std::reference_wrapper<const SampleSet>, std::reference_wrapper<const ExactDistribution>>;

// Draws Y_T from init and applies the reverse kernels for r = T-1 .. 0.
// Rows are processed in fixed chunks with derived RNG streams, so the output
// depends only on the seed, not on the thread count.
SampleSet reverse_sample(const ConditionalOracle& oracle, const NoiseSchedule& schedule, std::size_t n_samples,
                         const ReverseInit& init, std::uint64_t seed, ReverseDiagnostics* diagnostics = nullptr);

// Row callback for exact reverse propagation: fills `row` (length p) with the
// kernel from state `from` at step n.
using ReverseRowFn =
    std::function<void(int n, StateIndex from_index, std::span<const Symbol> from, std::span<double> row)>;

// Exact law of Y_0 for single-site reverse kernels given by `row_fn`.
ExactDistribution reverse_pushforward_rows(const NoiseSchedule& schedule, const ExactDistribution& init,
                                           const ReverseRowFn& row_fn, int guard_bits = kDefaultGuardBits);

ExactDistribution reverse_pushforward_exact(const ConditionalOracle& oracle, const NoiseSchedule& schedule,
                                            const ExactDistribution& init, int guard_bits = kDefaultGuardBits);

// q, q-1, ..., 1: the order in which ε = 0, T = q reverse sampling revisits sites.
std::vector<int> reverse_round_robin_order(int q);

// Starts from a uniform draw and resamples each site once. The k-th update
// (site order[k]) queries the oracle at step q-1-k.
Configuration autoregressive_sample(const ConditionalOracle& oracle, std::span<const int> order, Rng& rng);

// Exact output law of autoregressive_sample, by enumerating every uniform
// initialization and multiplying the conditionals along the update order.
ExactDistribution autoregressive_law(const ConditionalOracle& oracle, std::span<const int> order,
                                     int guard_bits = kDefaultGuardBits);

}  // namespace ndiff
