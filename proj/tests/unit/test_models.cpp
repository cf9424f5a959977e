#include <cmath>
#include <stdexcept>
#include <sstream>

#include "doctest.h"
#include "ndiff/error.hpp"
#include "ndiff/metrics.hpp"
#include "ndiff/models.hpp"

using namespace ndiff;

TEST_CASE("Ising energy by hand") {
  const IsingModel m(3, {{1, 2, 0.5}, {2, 3, -1.0}}, {0.1, 0.0, -0.2});
  // s = (+1, -1, -1): 0.5*(-1) + (-1)*(+1) + 0.1 - 0 + 0.2
  CHECK(energy(m, Configuration{1, 0, 0}) == doctest::Approx(-0.5 - 1.0 + 0.1 + 0.2));
  CHECK(energy(m, Configuration{1, 1, 1}) == doctest::Approx(0.5 - 1.0 + 0.1 - 0.2));
}

TEST_CASE("Potts energy by hand") {
  // fields[(i-1)*p + s]
  const PottsModel m(2, 3, {{1, 2, 0.7}}, {0.1, 0.2, 0.3, 0.0, -0.1, 0.4});
  CHECK(energy(m, Configuration{2, 2}) == doctest::Approx(-0.7 - 0.3 - 0.4));
  CHECK(energy(m, Configuration{0, 1}) == doctest::Approx(-0.1 + 0.1));
}

TEST_CASE("duplicate edges merge and endpoints are ordered") {
  const IsingModel m(3, {{2, 1, 0.5}, {1, 2, 0.25}, {3, 1, 1.0}}, {0, 0, 0});
  CHECK(m.edges().size() == 2);
  CHECK(m.edges()[0].i < m.edges()[0].j);
  double j12 = 0.0;
  for (const auto& e : m.edges())
    if (e.i == 1 && e.j == 2) j12 = e.coupling;
  CHECK(j12 == doctest::Approx(0.75));
  CHECK_THROWS(IsingModel(3, {{1, 1, 1.0}}, {0, 0, 0}));
  CHECK_THROWS(IsingModel(3, {{1, 4, 1.0}}, {0, 0, 0}));
}

TEST_CASE("EA lattice structure") {
  const auto m = ea_ising(EAParams{4, 1.2, 0.05, 3});
  CHECK(m.q() == 16);
  CHECK(m.edges().size() == 32);
  for (const auto& e : m.edges()) CHECK(std::abs(std::abs(e.coupling) - 1.2) < 1e-12);
  for (double h : m.fields()) CHECK(std::abs(std::abs(h) - 0.05) < 1e-12);
  for (int u = 1; u <= 16; ++u) CHECK(m.neighbors(u).size() == 4);
  // L = 2 wraps onto the same neighbour twice; couplings are summed.
  const auto small = ea_ising(EAParams{2, 1.0, 0.0, 1});
  CHECK(small.edges().size() == 4);
  const auto potts = ea_potts(2, 3, 1.2, 0.05, 1);
  CHECK(potts.q() == 4);
  CHECK(potts.p() == 3);
  // Same seed, same instance.
  CHECK(ea_ising(EAParams{3, 1.2, 0.05, 9}).edges()[2].coupling ==
        ea_ising(EAParams{3, 1.2, 0.05, 9}).edges()[2].coupling);
}

TEST_CASE("exact conditional matches ratios of the enumerated law") {
  for (const GibbsModel& model : {GibbsModel(random_ising(4, 0.8, 0.4, 11)), GibbsModel(random_potts(3, 3, 0.8, 0.4, 12))}) {
    const int q = num_sites(model), p = alphabet_size(model);
    const auto mu = exact_distribution(model);
    for (StateIndex i = 0; i < mu.size(); ++i) {
      const auto x = decode_config(i, q, p);
      for (int u = 1; u <= q; ++u) {
        const auto cond = exact_conditional(model, x, u);
        double denom = 0.0;
        std::vector<double> direct(static_cast<std::size_t>(p));
        for (int r = 0; r < p; ++r) {
          auto y = x;
          y[u - 1] = r;
          direct[r] = mu[encode_config(y, p)];
          denom += direct[r];
        }
        for (int r = 0; r < p; ++r) CHECK(cond[r] == doctest::Approx(direct[r] / denom).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("exact distribution of a single Ising spin") {
  const IsingModel m(1, {}, {0.3});
  const auto mu = exact_distribution(m);
  CHECK(mu[1] == doctest::Approx(std::exp(0.3) / (std::exp(0.3) + std::exp(-0.3))));
}

TEST_CASE("exact sampler frequencies converge and are seed-deterministic") {
  const GibbsModel m = random_ising(4, 0.5, 0.3, 5);
  const auto mu = exact_distribution(m);
  const auto s = sample_exact(mu, 200000, 17);
  CHECK(tv(mu, empirical_from_samples(s)) < 0.01);
  CHECK(sample_exact(mu, 100, 3).fingerprint() == sample_exact(mu, 100, 3).fingerprint());
  CHECK(s.provenance().find("exact") != std::string::npos);
}

TEST_CASE("Glauber sampler approaches the exact law") {
  const GibbsModel m = random_potts(3, 3, 0.5, 0.3, 8);
  const auto s = sample_glauber(m, 50000, 50, 2, 4);
  CHECK(tv(exact_distribution(m), empirical_from_samples(s)) < 0.03);
  CHECK(s.provenance().find("glauber") != std::string::npos);
}

TEST_CASE("model file round trip") {
  for (const GibbsModel& model : {GibbsModel(ea_ising(EAParams{3, 1.2, 0.05, 2})), GibbsModel(ea_potts(2, 4, 1.0, 0.1, 2))}) {
    std::stringstream buf;
    write_model(buf, model);
    const auto back = read_model(buf);
    CHECK(num_sites(back) == num_sites(model));
    CHECK(alphabet_size(back) == alphabet_size(model));
    const auto a = exact_distribution(model), b = exact_distribution(back);
    CHECK(tv(a, b) == 0.0);
  }
  std::stringstream bad("ndiff-model 1\ntype ising\nq 2\nedge 1 5 1.0\n");
  CHECK_THROWS_AS(read_model(bad), IoError);
  std::stringstream wrong("hello\n");
  CHECK_THROWS_AS(read_model(wrong), IoError);
}
