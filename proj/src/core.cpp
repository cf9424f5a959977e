#include "ndiff/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ndiff/error.hpp"

namespace ndiff {

void check_alphabet(int p) {
  if (p < 2) throw std::invalid_argument("alphabet size p must be >= 2, got " + std::to_string(p));
}

void check_config(std::span<const Symbol> config, int q, int p) {
  if (static_cast<int>(config.size()) != q)
    throw std::invalid_argument("configuration has length " + std::to_string(config.size()) +
                                ", expected q=" + std::to_string(q));
  for (Symbol s : config)
    if (s < 0 || s >= p)
      throw std::invalid_argument("symbol " + std::to_string(s) + " outside [0, " +
                                  std::to_string(p) + ")");
}

StateIndex state_count(int q, int p) {
  check_alphabet(p);
  if (q < 0) throw std::invalid_argument("q must be non-negative");
  constexpr StateIndex kLimit = StateIndex{1} << 62;
  StateIndex n = 1;
  for (int i = 0; i < q; ++i) {
    if (n > kLimit / static_cast<StateIndex>(p))
      throw std::overflow_error("p^q exceeds the 62-bit state index (q=" + std::to_string(q) +
                                ", p=" + std::to_string(p) + ")");
    n *= static_cast<StateIndex>(p);
  }
  return n;
}

bool within_guard(int q, int p, int guard_bits) {
  return static_cast<double>(q) * std::log2(static_cast<double>(p)) <= guard_bits + 1e-9;
}

void check_guard(int q, int p, int guard_bits) {
  check_alphabet(p);
  if (!within_guard(q, p, guard_bits))
    throw GuardError("state space p^q with q=" + std::to_string(q) + ", p=" + std::to_string(p) +
                     " exceeds the brute-force guard of " + std::to_string(guard_bits) + " bits");
}

StateIndex site_stride(int u, int p) {
  StateIndex s = 1;
  for (int i = 1; i < u; ++i) s *= static_cast<StateIndex>(p);
  return s;
}

StateIndex encode_config(std::span<const Symbol> config, int p) {
  const int q = static_cast<int>(config.size());
  state_count(q, p);  // overflow guard
  check_config(config, q, p);
  StateIndex index = 0;
  for (int i = q - 1; i >= 0; --i) index = index * static_cast<StateIndex>(p) + static_cast<StateIndex>(config[i]);
  return index;
}

void decode_into(StateIndex index, int p, std::span<Symbol> out) {
  for (auto& s : out) {
    s = static_cast<Symbol>(index % static_cast<StateIndex>(p));
    index /= static_cast<StateIndex>(p);
  }
}

Configuration decode_config(StateIndex index, int q, int p) {
  if (index >= state_count(q, p))
    throw std::out_of_range("state index " + std::to_string(index) + " out of range for q=" +
                            std::to_string(q) + ", p=" + std::to_string(p));
  Configuration c(static_cast<std::size_t>(q));
  decode_into(index, p, c);
  return c;
}

int hamming_distance(std::span<const Symbol> a, std::span<const Symbol> b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

// ---------------------------------------------------------------------------

ExactDistribution::ExactDistribution(int q, int p, std::vector<double> probs)
    : q_(q), p_(p), probs_(std::move(probs)) {
  if (probs_.size() != state_count(q, p))
    throw std::invalid_argument("probability table has " + std::to_string(probs_.size()) +
                                " entries, expected p^q");
  double total = 0.0;
  for (double v : probs_) {
    if (!(v >= 0.0)) throw std::invalid_argument("probability table has a negative or NaN entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("probability table sums to " + std::to_string(total));
}

ExactDistribution ExactDistribution::from_weights(int q, int p, std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("weights sum to zero");
  for (double& w : weights) w /= total;
  return ExactDistribution(q, p, std::move(weights));
}

ExactDistribution ExactDistribution::from_log_weights(int q, int p, std::span<const double> log_weights) {
  const double shift = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - shift);
  return from_weights(q, p, std::move(w));
}

ExactDistribution ExactDistribution::uniform(int q, int p, int guard_bits) {
  check_guard(q, p, guard_bits);
  const StateIndex n = state_count(q, p);
  return ExactDistribution(q, p, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ExactDistribution ExactDistribution::point_mass(int q, int p, StateIndex index, int guard_bits) {
  check_guard(q, p, guard_bits);
  std::vector<double> probs(state_count(q, p), 0.0);
  probs.at(index) = 1.0;
  return ExactDistribution(q, p, std::move(probs));
}

std::vector<double> ExactDistribution::site_marginal(int u) const {
  if (u < 1 || u > q_) throw std::out_of_range("site out of range");
  const StateIndex stride = site_stride(u, p_);
  std::vector<double> m(static_cast<std::size_t>(p_), 0.0);
  for (StateIndex i = 0; i < probs_.size(); ++i) m[(i / stride) % static_cast<StateIndex>(p_)] += probs_[i];
  return m;
}

// ---------------------------------------------------------------------------

SampleSet::SampleSet(int q, int p, std::string provenance) : q_(q), p_(p), provenance_(std::move(provenance)) {
  check_alphabet(p);
  if (q < 1) throw std::invalid_argument("q must be >= 1");
}

SampleSet::SampleSet(int q, int p, std::vector<Symbol> flat, std::string provenance)
    : SampleSet(q, p, std::move(provenance)) {
  if (flat.size() % static_cast<std::size_t>(q) != 0)
    throw std::invalid_argument("flat sample data is not a multiple of q");
  for (Symbol s : flat)
    if (s < 0 || s >= p) throw std::invalid_argument("sample symbol outside the alphabet");
  data_ = std::move(flat);
}

void SampleSet::add(std::span<const Symbol> row) {
  check_config(row, q_, p_);
  data_.insert(data_.end(), row.begin(), row.end());
}

SampleSet SampleSet::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw std::out_of_range("SampleSet::slice");
  const auto q = static_cast<std::size_t>(q_);
  return SampleSet(q_, p_, std::vector<Symbol>(data_.begin() + begin * q, data_.begin() + end * q), provenance_);
}

std::uint64_t SampleSet::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  feed(static_cast<std::uint64_t>(q_));
  feed(static_cast<std::uint64_t>(p_));
  for (Symbol s : data_) feed(static_cast<std::uint64_t>(s));
  return h;
}

double EmpiricalDistribution::probability(StateIndex i) const {
  auto it = counts.find(i);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

EmpiricalDistribution empirical_from_samples(const SampleSet& samples) {
  if (samples.empty()) throw std::invalid_argument("empirical_from_samples: empty sample set");
  EmpiricalDistribution e;
  e.q = samples.q();
  e.p = samples.p();
  for (std::size_t i = 0; i < samples.size(); ++i) ++e.counts[encode_config(samples.row(i), samples.p())];
  e.total = samples.size();
  return e;
}

}  // namespace ndiff
