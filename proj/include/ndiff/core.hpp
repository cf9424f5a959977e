#pragma once

// State representation shared by every module.
//
// A configuration is a length-q vector of symbols in {0, ..., p-1}. Sites are
// numbered 1..q in every public interface; the mixed-radix state index puts
// site 1 in the least-significant digit.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ndiff {

using Symbol = std::int32_t;
using StateIndex = std::uint64_t;
using Configuration = std::vector<Symbol>;

// Brute-force tables are refused above q * log2(p) bits unless raised.
inline constexpr int kDefaultGuardBits = 24;

void check_alphabet(int p);
void check_config(std::span<const Symbol> config, int q, int p);

// p^q, throwing std::overflow_error when q * log2(p) > 62.
StateIndex state_count(int q, int p);

// Throws GuardError when q * log2(p) exceeds guard_bits.
void check_guard(int q, int p, int guard_bits);
bool within_guard(int q, int p, int guard_bits);

// p^(u-1): the index distance between neighbours that differ at site u.
StateIndex site_stride(int u, int p);

StateIndex encode_config(std::span<const Symbol> config, int p);
Configuration decode_config(StateIndex index, int q, int p);
// Allocation-free variant; no range check on index.
void decode_into(StateIndex index, int p, std::span<Symbol> out);

int hamming_distance(std::span<const Symbol> a, std::span<const Symbol> b);

class ExactDistribution {
 public:
  // probs must be non-negative and sum to 1 within 1e-12.
  ExactDistribution(int q, int p, std::vector<double> probs);

  static ExactDistribution from_weights(int q, int p, std::vector<double> weights);
  // Normalizes exp(log_weights) with a max shift.
  static ExactDistribution from_log_weights(int q, int p, std::span<const double> log_weights);
  static ExactDistribution uniform(int q, int p, int guard_bits = kDefaultGuardBits);
  static ExactDistribution point_mass(int q, int p, StateIndex index,
                                      int guard_bits = kDefaultGuardBits);

  int q() const { return q_; }
  int p() const { return p_; }
  std::size_t size() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }
  double operator[](StateIndex i) const { return probs_[i]; }

  // Marginal law of site u (length p).
  std::vector<double> site_marginal(int u) const;

 private:
  int q_;
  int p_;
  std::vector<double> probs_;
};

// Rows stored contiguously, row-major.
class SampleSet {
 public:
  SampleSet(int q, int p, std::string provenance = {});
  SampleSet(int q, int p, std::vector<Symbol> flat, std::string provenance = {});

  int q() const { return q_; }
  int p() const { return p_; }
  std::size_t size() const { return q_ == 0 ? 0 : data_.size() / static_cast<std::size_t>(q_); }
  bool empty() const { return data_.empty(); }
  std::span<const Symbol> row(std::size_t i) const {
    return {data_.data() + i * static_cast<std::size_t>(q_), static_cast<std::size_t>(q_)};
  }
  std::span<const Symbol> flat() const { return data_; }
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string text) { provenance_ = std::move(text); }

  void add(std::span<const Symbol> row);
  void reserve(std::size_t rows) { data_.reserve(rows * static_cast<std::size_t>(q_)); }

  // Rows [begin, end) as a new set.
  SampleSet slice(std::size_t begin, std::size_t end) const;

  // FNV-1a over the header and rows; used as a data fingerprint.
  std::uint64_t fingerprint() const;

 private:
  int q_;
  int p_;
  std::vector<Symbol> data_;
  std::string provenance_;
};

struct EmpiricalDistribution {
  int q = 0;
  int p = 0;
  std::map<StateIndex, std::uint64_t> counts;
  std::uint64_t total = 0;

  double probability(StateIndex i) const;
};

EmpiricalDistribution empirical_from_samples(const SampleSet& samples);

// Sample files. Native format: a "q=<q> p=<p>" header, optional "# ..." lines
// (provenance), then one row per line of space-separated symbols. Raw CSV with
// q integer columns is also accepted; p is then inferred as max+1 unless given.
void write_samples(std::ostream& out, const SampleSet& samples);
void write_samples(const std::filesystem::path& path, const SampleSet& samples);
SampleSet read_samples(std::istream& in, std::optional<int> p = std::nullopt);
SampleSet read_samples(const std::filesystem::path& path, std::optional<int> p = std::nullopt);

}  // namespace ndiff
