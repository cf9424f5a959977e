#include "ndiff/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "ndiff/error.hpp"
#include "ndiff/metrics.hpp"
#include "ndiff/reverse.hpp"

namespace ndiff {

std::string BoundReport::to_json() const {
  nlohmann::json j;
  j["lhs"] = lhs;
  j["delta_T"] = delta_T;
  j["eta"] = eta;
  j["gamma"] = gamma;
  j["steps"] = steps;
  j["rhs"] = rhs;
  j["holds"] = holds;
  return j.dump();
}

std::string to_string(PerturbationMode mode) {
  return mode == PerturbationMode::MixWithUniform ? "mix-with-uniform" : "random-simplex-jitter";
}

PerturbationMode parse_perturbation_mode(const std::string& s) {
  if (s == "mix-with-uniform" || s == "mix") return PerturbationMode::MixWithUniform;
  if (s == "random-simplex-jitter" || s == "jitter") return PerturbationMode::RandomSimplexJitter;
  throw ConfigError("unknown perturbation mode '" + s + "'");
}

void perturb_row(const Perturbation& perturbation, int n, StateIndex from_index, std::span<double> row) {
  const double m = perturbation.magnitude;
  if (m < 0.0 || m > 1.0) throw std::invalid_argument("perturbation magnitude must be in [0, 1]");
  if (m == 0.0) return;
  const std::size_t p = row.size();
  if (perturbation.mode == PerturbationMode::MixWithUniform) {
    for (double& v : row) v = (1.0 - m) * v + m / static_cast<double>(p);
    return;
  }
  Rng rng(derive_seed(perturbation.seed, {static_cast<std::uint64_t>(n), from_index}));
  std::vector<double> d(p);
  double total = 0.0;
  for (double& v : d) total += (v = -std::log(1.0 - uniform01(rng)));
  for (std::size_t r = 0; r < p; ++r) row[r] = (1.0 - m) * row[r] + m * d[r] / total;
}

namespace {

double row_tv(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return 0.5 * acc;
}

void finish(BoundReport& rep) {
  rep.rhs = rep.delta_T + rep.steps * rep.eta + rep.gamma;
  rep.holds = rep.lhs <= rep.rhs + kBoundTolerance;
}

// Exact reverse row at step n from state `from`, read from mu_n.
void exact_row(const ExactDistribution& mu_n, const NoiseSchedule& s, int n, StateIndex from_index,
               std::span<const Symbol> from, std::span<double> row) {
  const int u = s.coordinate_at(n);
  const int p = s.p();
  const StateIndex stride = site_stride(u, p);
  const StateIndex base = from_index - static_cast<StateIndex>(from[u - 1]) * stride;
  double denom = 0.0;
  for (int r = 0; r < p; ++r) denom += (row[r] = (r == from[u - 1] ? s.b() : s.a()) * mu_n[base + r * stride]);
  if (!(denom > 1e-300)) throw std::domain_error("reverse row undefined: mu_n has a support hole");
  for (int r = 0; r < p; ++r) row[r] /= denom;
}

}  // namespace

BoundReport verify_error_bound(const ExactDistribution& mu0, const NoiseSchedule& schedule,
                               const Perturbation& perturbation, int guard_bits) {
  check_guard(mu0.q(), mu0.p(), guard_bits);
  const auto marginals = forward_marginals(mu0, schedule, guard_bits);
  const int T = schedule.steps();
  const int p = schedule.p();
  BoundReport rep;
  rep.steps = T;
  rep.delta_T = tv(marginals.back(), ExactDistribution::uniform(mu0.q(), mu0.p(), guard_bits));

  // eta over every (step, state), not only the states the pushforward visits.
  Configuration x(static_cast<std::size_t>(mu0.q()));
  std::vector<double> row(static_cast<std::size_t>(p)), pert(static_cast<std::size_t>(p));
  for (int n = 0; n < T; ++n)
    for (StateIndex i = 0; i < mu0.size(); ++i) {
      decode_into(i, p, x);
      exact_row(marginals[n], schedule, n, i, x, row);
      pert = row;
      perturb_row(perturbation, n, i, pert);
      rep.eta = std::max(rep.eta, row_tv(row, pert));
    }

  auto row_fn = [&](int n, StateIndex i, std::span<const Symbol> from, std::span<double> out) {
    exact_row(marginals[n], schedule, n, i, from, out);
    perturb_row(perturbation, n, i, out);
  };
  const auto result = reverse_pushforward_rows(schedule, ExactDistribution::uniform(mu0.q(), mu0.p(), guard_bits),
                                               row_fn, guard_bits);
  rep.lhs = tv(result, mu0);
  finish(rep);
  return rep;
}

BoundReport verify_error_bound(const GibbsModel& model, const NoiseSchedule& schedule,
                               const Perturbation& perturbation, int guard_bits) {
  return verify_error_bound(exact_distribution(model, guard_bits), schedule, perturbation, guard_bits);
}

BoundReport verify_init_error(const ExactDistribution& mu0, const NoiseSchedule& schedule,
                              const ExactDistribution& init, int guard_bits) {
  check_guard(mu0.q(), mu0.p(), guard_bits);
  const auto marginals = forward_marginals(mu0, schedule, guard_bits);
  BoundReport rep;
  rep.steps = schedule.steps();
  const auto uniform = ExactDistribution::uniform(mu0.q(), mu0.p(), guard_bits);
  rep.delta_T = tv(marginals.back(), uniform);
  rep.gamma = tv(init, uniform);
  auto row_fn = [&](int n, StateIndex i, std::span<const Symbol> from, std::span<double> out) {
    exact_row(marginals[n], schedule, n, i, from, out);
  };
  rep.lhs = tv(reverse_pushforward_rows(schedule, init, row_fn, guard_bits), mu0);
  finish(rep);
  return rep;
}

BoundReport verify_init_error(const GibbsModel& model, const NoiseSchedule& schedule, std::size_t noise_samples,
                              std::uint64_t seed, int guard_bits) {
  if (noise_samples == 0) throw std::invalid_argument("verify_init_error: noise_samples must be positive");
  const int q = num_sites(model);
  const int p = alphabet_size(model);
  check_guard(q, p, guard_bits);
  const StateIndex n_states = state_count(q, p);
  std::vector<double> counts(n_states, 0.0);
  Rng rng(seed);
  for (std::size_t k = 0; k < noise_samples; ++k) {
    StateIndex idx = 0;
    for (int v = q; v-- > 0;) idx = idx * static_cast<StateIndex>(p) + static_cast<StateIndex>(uniform_below(rng, p));
    counts[idx] += 1.0;
  }
  const auto init = ExactDistribution::from_weights(q, p, std::move(counts));
  return verify_init_error(exact_distribution(model, guard_bits), schedule, init, guard_bits);
}

// ---------------------------------------------------------------------------

std::string DegenerateReport::to_json() const {
  nlohmann::json j;
  j["steps"] = steps;
  j["canonical_max_error"] = canonical_max_error;
  j["degenerate_max_error"] = degenerate_max_error;
  j["nonlocal_mass"] = nonlocal_mass;
  j["mixes"] = nlohmann::json::array();
  for (const auto& m : mixes) j["mixes"].push_back({{"lambda", m.lambda}, {"max_marginal_error", m.max_marginal_error}});
  return j.dump();
}

DegenerateReport degenerate_reverse_demo(const GibbsModel& model, const NoiseSchedule& schedule,
                                         const std::vector<double>& lambdas) {
  const int q = num_sites(model);
  const int p = alphabet_size(model);
  if (q != schedule.q() || p != schedule.p()) throw std::invalid_argument("model does not match the schedule");
  check_guard(q, p, 12);
  for (double l : lambdas)
    if (l < 0.0 || l > 1.0) throw std::invalid_argument("mixing weight must be in [0, 1]");
  const auto marginals = forward_marginals(exact_distribution(model), schedule);
  const auto S = static_cast<std::size_t>(state_count(q, p));
  const int T = schedule.steps();

  std::vector<Configuration> states(S);
  for (std::size_t i = 0; i < S; ++i) states[i] = decode_config(i, q, p);

  DegenerateReport rep;
  rep.steps = T;
  for (double l : lambdas) rep.mixes.push_back({l, 0.0});
  std::vector<double> canon(S * S), row(static_cast<std::size_t>(p));
  for (int t = 0; t < T; ++t) {
    const auto& from_law = marginals[t + 1];
    const auto& target = marginals[t];
    const int u = schedule.coordinate_at(t);
    const StateIndex stride = site_stride(u, p);
    // Canonical kernel: from state i (time t+1) to state j (time t).
    std::fill(canon.begin(), canon.end(), 0.0);
    for (std::size_t i = 0; i < S; ++i) {
      exact_row(target, schedule, t, i, states[i], row);
      const StateIndex base = i - static_cast<StateIndex>(states[i][u - 1]) * stride;
      for (int r = 0; r < p; ++r) canon[i * S + base + r * stride] = row[r];
    }
    auto pushforward_error = [&](double lambda) {
      // lambda * canonical + (1 - lambda) * resampling.
      double err = 0.0;
      for (std::size_t j = 0; j < S; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < S; ++i)
          acc += from_law[i] * (lambda * canon[i * S + j] + (1.0 - lambda) * target[j]);
        err = std::max(err, std::abs(acc - target[j]));
      }
      return err;
    };
    rep.canonical_max_error = std::max(rep.canonical_max_error, pushforward_error(1.0));
    rep.degenerate_max_error = std::max(rep.degenerate_max_error, pushforward_error(0.0));
    for (auto& m : rep.mixes) m.max_marginal_error = std::max(m.max_marginal_error, pushforward_error(m.lambda));

    double nonlocal = 0.0;
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t j = 0; j < S; ++j)
        if (hamming_distance(states[i], states[j]) > 1) nonlocal += from_law[i] * target[j];
    rep.nonlocal_mass += nonlocal / T;
  }
  return rep;
}

}  // namespace ndiff
