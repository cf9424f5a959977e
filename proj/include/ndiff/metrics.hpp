#pragma once

// Distances between distributions and sample sets.

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ndiff/core.hpp"

namespace ndiff {

// Half-L1 distance over the union support. Throws std::invalid_argument when
// (q, p) differ.
double tv(const ExactDistribution& a, const ExactDistribution& b);
double tv(const ExactDistribution& a, const EmpiricalDistribution& b);
double tv(const EmpiricalDistribution& a, const ExactDistribution& b);
double tv(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

// q x q, row-major.
struct CorrelationMatrix {
  int q = 0;
  std::vector<double> values;

  double operator()(int i, int j) const { return values[static_cast<std::size_t>(i * q + j)]; }
};

// p = 2: mean of s_i s_j with s = 2 sigma - 1. p > 2: mean of 1{sigma_i = sigma_j}.
CorrelationMatrix cross_correlation(const SampleSet& samples);
// Same statistic under an exact law.
CorrelationMatrix cross_correlation(const ExactDistribution& dist);

// Mean absolute difference over the strict upper triangle.
double cross_correlation_error(const CorrelationMatrix& a, const CorrelationMatrix& b);
double cross_correlation_error(const SampleSet& a, const SampleSet& b);

struct MetricReport {
  std::string metric;
  double value = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::map<std::string, std::string> parameters;

  std::string to_json() const;
};

// Either a fixed bandwidth or the median pairwise distance of the pooled set.
struct MedianBandwidth {};
using Bandwidth = std::variant<double, MedianBandwidth>;

// Unbiased squared MMD with a Gaussian kernel on +-1 (p = 2) or Phi-encoded
// (p > 2) rows. At most max_points rows from each set are used (the first ones).
MetricReport mmd(const SampleSet& a, const SampleSet& b, Bandwidth bandwidth = MedianBandwidth{},
                 std::size_t max_points = 4000);

// Row encoding used by mmd.
std::vector<double> encode_rows(const SampleSet& samples, std::size_t max_rows);
int encoded_dim(int q, int p);

MetricReport tv_report(const SampleSet& generated, const ExactDistribution& reference);
MetricReport tv_report(const SampleSet& generated, const SampleSet& reference);
MetricReport cross_correlation_report(const SampleSet& generated, const SampleSet& reference);

}  // namespace ndiff
