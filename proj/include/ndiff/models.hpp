#pragma once

// Pairwise Gibbs models mu(sigma) ∝ exp(H(sigma)).
//
// Ising: symbols {0,1} are read as spins s = 2*sigma - 1 and
//   H(sigma) = sum_{(i,j)} J_ij s_i s_j + sum_i h_i s_i.
// Potts: H(sigma) = -sum_{(i,j)} J_ij 1{sigma_i = sigma_j} - sum_i h_{i, sigma_i}.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "ndiff/core.hpp"

namespace ndiff {

// Sites are 1-based; constructors reorder to i < j and merge duplicates by
// summing couplings.
struct Edge {
  int i = 0;
  int j = 0;
  double coupling = 0.0;
};

struct Neighbor {
  int site = 0;  // 1-based
  double coupling = 0.0;
};

class IsingModel {
 public:
  IsingModel(int q, std::vector<Edge> edges, std::vector<double> fields);

  int q() const { return q_; }
  int p() const { return 2; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<double>& fields() const { return fields_; }
  std::span<const Neighbor> neighbors(int u) const;

 private:
  int q_;
  std::vector<Edge> edges_;
  std::vector<double> fields_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

class PottsModel {
 public:
  // fields is q x p row-major: fields[(i-1)*p + s] = h_{i,s}.
  PottsModel(int q, int p, std::vector<Edge> edges, std::vector<double> fields);

  int q() const { return q_; }
  int p() const { return p_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<double>& fields() const { return fields_; }
  double field(int site, int symbol) const { return fields_[static_cast<std::size_t>((site - 1) * p_ + symbol)]; }
  std::span<const Neighbor> neighbors(int u) const;

 private:
  int q_;
  int p_;
  std::vector<Edge> edges_;
  std::vector<double> fields_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

using GibbsModel = std::variant<IsingModel, PottsModel>;

int num_sites(const GibbsModel& model);
int alphabet_size(const GibbsModel& model);

struct EAParams {
  int L = 4;
  double J_mag = 1.2;
  double h_mag = 0.05;
  std::uint64_t seed = 0;
};

// L x L periodic lattice; each site couples to its right and bottom neighbour.
IsingModel ea_ising(const EAParams& params);
PottsModel ea_potts(int L, int p, double J, double h, std::uint64_t seed);

// Complete-graph instances with couplings and fields uniform in [-scale, scale];
// used by the brute-force checks.
IsingModel random_ising(int q, double coupling_scale, double field_scale, std::uint64_t seed);
PottsModel random_potts(int q, int p, double coupling_scale, double field_scale, std::uint64_t seed);

double energy(const IsingModel& model, std::span<const Symbol> config);
double energy(const PottsModel& model, std::span<const Symbol> config);
double energy(const GibbsModel& model, std::span<const Symbol> config);

ExactDistribution exact_distribution(const GibbsModel& model, int guard_bits = kDefaultGuardBits);

// mu(sigma_u = r | sigma_{-u}) from the terms of H touching site u; config[u-1]
// is ignored.
void exact_conditional(const GibbsModel& model, std::span<const Symbol> config, int u, std::span<double> out);
std::vector<double> exact_conditional(const GibbsModel& model, std::span<const Symbol> config, int u);

SampleSet sample_exact(const ExactDistribution& dist, std::size_t n, std::uint64_t seed);

// Heat-bath chain with sequential sweeps; one sample is recorded every
// `thinning` sweeps after `burn_in` sweeps.
SampleSet sample_glauber(const GibbsModel& model, std::size_t n, int burn_in, int thinning, std::uint64_t seed);

// Text serialization, format tag "ndiff-model 1".
void write_model(std::ostream& out, const GibbsModel& model);
void write_model(const std::filesystem::path& path, const GibbsModel& model);
GibbsModel read_model(std::istream& in);
GibbsModel read_model(const std::filesystem::path& path);

}  // namespace ndiff
