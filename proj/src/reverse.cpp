#include "ndiff/reverse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ndiff/kernels.hpp"
#include "ndiff/parallel.hpp"
#include "ndiff/rng.hpp"

namespace ndiff {

namespace {

constexpr double kWeightFloor = 1e-30;
constexpr std::size_t kChunkRows = 256;

void check_distribution(std::span<const double> v, double tol) {
  double total = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::runtime_error("oracle returned a negative or non-finite probability");
    total += x;
  }
  if (std::abs(total - 1.0) > tol)
    throw std::runtime_error("oracle returned a vector summing to " + std::to_string(total));
}

void check_oracle(const ConditionalOracle& oracle, const NoiseSchedule& schedule) {
  if (oracle.q() != schedule.q() || oracle.p() != schedule.p())
    throw std::invalid_argument("oracle (q, p) does not match the schedule");
  if (oracle.steps() < schedule.steps())
    throw std::invalid_argument("oracle covers " + std::to_string(oracle.steps()) + " steps, schedule needs " +
                                std::to_string(schedule.steps()));
}

}  // namespace

std::vector<double> ConditionalOracle::conditional(int n, int u, std::span<const Symbol> config) const {
  std::vector<double> out(static_cast<std::size_t>(p()));
  conditional(n, u, config, out);
  return out;
}

// ---------------------------------------------------------------------------

ExactOracle::ExactOracle(std::vector<ExactDistribution> marginals) : marginals_(std::move(marginals)) {
  if (marginals_.empty()) throw std::invalid_argument("ExactOracle: no marginals");
  for (const auto& m : marginals_)
    if (m.q() != marginals_.front().q() || m.p() != marginals_.front().p())
      throw std::invalid_argument("ExactOracle: marginals disagree on (q, p)");
}

ExactOracle ExactOracle::from_model(const GibbsModel& model, const NoiseSchedule& schedule, int guard_bits) {
  auto marginals = forward_marginals(exact_distribution(model, guard_bits), schedule, guard_bits);
  marginals.pop_back();  // mu_T is never queried
  if (marginals.empty()) marginals.push_back(exact_distribution(model, guard_bits));
  return ExactOracle(std::move(marginals));
}

void ExactOracle::conditional(int n, int u, std::span<const Symbol> config, std::span<double> out) const {
  const auto& mu = marginals_.at(static_cast<std::size_t>(n));
  const int p = mu.p();
  const StateIndex stride = site_stride(u, p);
  StateIndex index = 0;
  for (int i = mu.q() - 1; i >= 0; --i) index = index * static_cast<StateIndex>(p) + (i == u - 1 ? 0 : config[i]);
  double total = 0.0;
  for (int r = 0; r < p; ++r) total += (out[r] = mu[index + static_cast<StateIndex>(r) * stride]);
  if (total > 0.0) {
    for (int r = 0; r < p; ++r) out[r] /= total;
  } else {
    // Unreachable context; any distribution is a valid answer.
    for (int r = 0; r < p; ++r) out[r] = 1.0 / p;
  }
}

ModelOracle::ModelOracle(GibbsModel model, int steps) : model_(std::move(model)), steps_(steps) {}

void ModelOracle::conditional(int, int u, std::span<const Symbol> config, std::span<double> out) const {
  exact_conditional(model_, config, u, out);
}

void UniformOracle::conditional(int, int, std::span<const Symbol>, std::span<double> out) const {
  for (double& v : out) v = 1.0 / static_cast<double>(out.size());
}

// ---------------------------------------------------------------------------

double reverse_row_from_conditional(std::span<const double> cond, Symbol current, double a, double b,
                                    std::span<double> row) {
  const std::size_t p = cond.size();
  double total = 0.0;
  for (std::size_t r = 0; r < p; ++r) {
    row[r] = (static_cast<Symbol>(r) == current ? b : a) * cond[r];
    total += row[r];
  }
  if (!(total > kWeightFloor)) {
    // Every weight underflowed: keep the current symbol.
    for (std::size_t r = 0; r < p; ++r) row[r] = static_cast<Symbol>(r) == current ? 1.0 : 0.0;
    return total;
  }
  for (std::size_t r = 0; r < p; ++r) row[r] /= total;
  return total;
}

std::vector<double> exact_reverse_kernel_row(const ExactDistribution& mu_n, const NoiseSchedule& schedule, int n,
                                             std::span<const Symbol> from) {
  if (mu_n.q() != schedule.q() || mu_n.p() != schedule.p())
    throw std::invalid_argument("exact_reverse_kernel_row: distribution does not match the schedule");
  check_config(from, schedule.q(), schedule.p());
  const int u = schedule.coordinate_at(n);
  const int p = schedule.p();
  const StateIndex stride = site_stride(u, p);
  const StateIndex base = encode_config(from, p) - static_cast<StateIndex>(from[u - 1]) * stride;
  std::vector<double> row(static_cast<std::size_t>(p));
  double denom = 0.0;
  for (int r = 0; r < p; ++r) {
    // k_n(from, sigma) * mu_n(sigma) for sigma = from with site u set to r.
    row[r] = (r == from[u - 1] ? schedule.b() : schedule.a()) * mu_n[base + static_cast<StateIndex>(r) * stride];
    denom += row[r];
  }
  if (!(denom > 1e-300))
    throw std::domain_error("exact_reverse_kernel_row: mu_n has no mass around the given state (support hole)");
  for (double& v : row) v /= denom;
  return row;
}

std::vector<double> reverse_kernel_row_from_conditionals(const ConditionalOracle& oracle,
                                                         const NoiseSchedule& schedule, int n,
                                                         std::span<const Symbol> from) {
  if (oracle.q() != schedule.q() || oracle.p() != schedule.p())
    throw std::invalid_argument("oracle (q, p) does not match the schedule");
  check_config(from, schedule.q(), schedule.p());
  const int u = schedule.coordinate_at(n);
  std::vector<double> cond = oracle.conditional(n, u, from);
  check_distribution(cond, 1e-9);
  std::vector<double> row(cond.size());
  reverse_row_from_conditional(cond, from[u - 1], schedule.a(), schedule.b(), row);
  return row;
}

// ---------------------------------------------------------------------------

SampleSet reverse_sample(const ConditionalOracle& oracle, const NoiseSchedule& schedule, std::size_t n_samples,
                         const ReverseInit& init, std::uint64_t seed, ReverseDiagnostics* diagnostics) {
  check_oracle(oracle, schedule);
  const int q = schedule.q();
  const int p = schedule.p();

  std::vector<double> init_cdf;
  const SampleSet* init_rows = nullptr;
  if (const auto* set = std::get_if<std::reference_wrapper<const SampleSet>>(&init)) {
    init_rows = &set->get();
    if (init_rows->q() != q || init_rows->p() != p || init_rows->empty())
      throw std::invalid_argument("reverse_sample: initial sample set does not match (q, p)");
  } else if (const auto* dist = std::get_if<std::reference_wrapper<const ExactDistribution>>(&init)) {
    const ExactDistribution& d = dist->get();
    if (d.q() != q || d.p() != p) throw std::invalid_argument("reverse_sample: initial law does not match (q, p)");
    init_cdf.resize(d.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) init_cdf[i] = (acc += d.probs()[i]);
  }

  std::vector<Symbol> out(n_samples * static_cast<std::size_t>(q));
  const std::size_t chunks = (n_samples + kChunkRows - 1) / kChunkRows;
  std::vector<ReverseDiagnostics> chunk_diag(chunks);

#pragma omp parallel
  {
    std::vector<double> cond(static_cast<std::size_t>(p));
    std::vector<double> row(static_cast<std::size_t>(p));
#pragma omp for schedule(dynamic, 1)
    for (std::size_t c = 0; c < chunks; ++c) {
      Rng rng(derive_seed(seed, {c}));
      ReverseDiagnostics& diag = chunk_diag[c];
      const std::size_t end = std::min(n_samples, (c + 1) * kChunkRows);
      for (std::size_t i = c * kChunkRows; i < end; ++i) {
        std::span<Symbol> state(out.data() + i * static_cast<std::size_t>(q), static_cast<std::size_t>(q));
        if (init_rows != nullptr) {
          auto src = init_rows->row(static_cast<std::size_t>(
              uniform_below(rng, static_cast<int>(std::min<std::size_t>(init_rows->size(), 0x7fffffff)))));
          std::copy(src.begin(), src.end(), state.begin());
        } else if (!init_cdf.empty()) {
          const double x = uniform01(rng) * init_cdf.back();
          auto it = std::upper_bound(init_cdf.begin(), init_cdf.end(), x);
          auto idx = static_cast<StateIndex>(std::min<std::ptrdiff_t>(it - init_cdf.begin(),
                                                                       static_cast<std::ptrdiff_t>(init_cdf.size()) - 1));
          decode_into(idx, p, state);
        } else {
          for (auto& s : state) s = uniform_below(rng, p);
        }
        for (int r = schedule.steps() - 1; r >= 0; --r) {
          const int u = r % q + 1;
          oracle.conditional(r, u, state, cond);
          double cond_sum = 0.0;
          for (double v : cond) cond_sum += v;
          const Symbol current = state[u - 1];
          const double total = reverse_row_from_conditional(cond, current, schedule.a(), schedule.b(), row);
          diag.max_row_sum_error = std::max(diag.max_row_sum_error, std::abs(cond_sum - 1.0));
          if (total < kWeightFloor) ++diag.floored_rows;
          if (cond[current] > 0.0)
            for (double v : cond) diag.max_ratio = std::max(diag.max_ratio, v / cond[current]);
          ++diag.rows;
          state[u - 1] = sample_categorical(row, rng);
        }
      }
    }
  }

  if (diagnostics != nullptr) {
    *diagnostics = {};
    for (const auto& d : chunk_diag) {
      diagnostics->max_row_sum_error = std::max(diagnostics->max_row_sum_error, d.max_row_sum_error);
      diagnostics->max_ratio = std::max(diagnostics->max_ratio, d.max_ratio);
      diagnostics->floored_rows += d.floored_rows;
      diagnostics->rows += d.rows;
    }
  }
  return SampleSet(q, p, std::move(out),
                   "sampler=reverse seed=" + std::to_string(seed) + " steps=" + std::to_string(schedule.steps()) +
                       " epsilon=" + std::to_string(schedule.epsilon()));
}

// ---------------------------------------------------------------------------

ExactDistribution reverse_pushforward_rows(const NoiseSchedule& schedule, const ExactDistribution& init,
                                           const ReverseRowFn& row_fn, int guard_bits) {
  if (init.q() != schedule.q() || init.p() != schedule.p())
    throw std::invalid_argument("reverse_pushforward: initial law does not match the schedule");
  check_guard(init.q(), init.p(), guard_bits);
  std::vector<double> mu(init.probs().begin(), init.probs().end());
  for (int r = schedule.steps() - 1; r >= 0; --r)
    mu = kernels::reverse_step_table(mu, schedule.q(), schedule.p(), r, r % schedule.q() + 1, row_fn);
  return ExactDistribution::from_weights(init.q(), init.p(), std::move(mu));
}

ExactDistribution reverse_pushforward_exact(const ConditionalOracle& oracle, const NoiseSchedule& schedule,
                                            const ExactDistribution& init, int guard_bits) {
  check_oracle(oracle, schedule);
  const double a = schedule.a();
  const double b = schedule.b();
  const int p = schedule.p();
  auto row_fn = [&](int n, StateIndex, std::span<const Symbol> from, std::span<double> row) {
    const int u = n % schedule.q() + 1;
    thread_local std::vector<double> cond;
    cond.resize(static_cast<std::size_t>(p));
    oracle.conditional(n, u, from, cond);
    reverse_row_from_conditional(cond, from[u - 1], a, b, row);
  };
  return reverse_pushforward_rows(schedule, init, row_fn, guard_bits);
}

// ---------------------------------------------------------------------------

std::vector<int> reverse_round_robin_order(int q) {
  std::vector<int> order(static_cast<std::size_t>(q));
  for (int k = 0; k < q; ++k) order[k] = q - k;
  return order;
}

namespace {

void check_order(const ConditionalOracle& oracle, std::span<const int> order) {
  const int q = oracle.q();
  if (static_cast<int>(order.size()) != q) throw std::invalid_argument("update order must list every site once");
  std::vector<bool> seen(static_cast<std::size_t>(q), false);
  for (int u : order) {
    if (u < 1 || u > q || seen[u - 1]) throw std::invalid_argument("update order is not a permutation of 1..q");
    seen[u - 1] = true;
  }
  if (oracle.steps() < q) throw std::invalid_argument("oracle must cover at least q steps");
}

}  // namespace

Configuration autoregressive_sample(const ConditionalOracle& oracle, std::span<const int> order, Rng& rng) {
  check_order(oracle, order);
  const int q = oracle.q();
  const int p = oracle.p();
  Configuration state(static_cast<std::size_t>(q));
  for (auto& s : state) s = uniform_below(rng, p);
  std::vector<double> cond(static_cast<std::size_t>(p));
  for (int k = 0; k < q; ++k) {
    const int u = order[k];
    oracle.conditional(q - 1 - k, u, state, cond);
    state[u - 1] = sample_categorical(cond, rng);
  }
  return state;
}

ExactDistribution autoregressive_law(const ConditionalOracle& oracle, std::span<const int> order, int guard_bits) {
  check_order(oracle, order);
  const int q = oracle.q();
  const int p = oracle.p();
  check_guard(2 * q, p, guard_bits);
  const StateIndex n_states = state_count(q, p);
  std::vector<double> law(n_states, 0.0);
  const double init_weight = 1.0 / static_cast<double>(n_states);
  std::vector<std::vector<double>> cond(static_cast<std::size_t>(q), std::vector<double>(static_cast<std::size_t>(p)));
  Configuration state(static_cast<std::size_t>(q));

  // Depth-first over the symbol chosen at each update.
  std::function<void(int, double)> expand = [&](int k, double weight) {
    if (k == q) {
      law[encode_config(state, p)] += weight;
      return;
    }
    const int u = order[k];
    const Symbol saved = state[u - 1];
    oracle.conditional(q - 1 - k, u, state, cond[k]);
    for (int r = 0; r < p; ++r) {
      if (cond[k][r] == 0.0) continue;
      state[u - 1] = r;
      expand(k + 1, weight * cond[k][r]);
    }
    state[u - 1] = saved;
  };
  for (StateIndex init = 0; init < n_states; ++init) {
    decode_into(init, p, state);
    expand(0, init_weight);
  }
  return ExactDistribution::from_weights(q, p, std::move(law));
}

}  // namespace ndiff
