#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "ndiff/metrics.hpp"
#include "ndiff/models.hpp"
#include "ndiff/rng.hpp"

using namespace ndiff;

namespace {

SampleSet constant_rows(int q, int p, Symbol v, int n) {
  SampleSet s(q, p);
  for (int k = 0; k < n; ++k) s.add(Configuration(static_cast<std::size_t>(q), v));
  return s;
}

ExactDistribution random_law(int q, int p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(state_count(q, p));
  for (double& v : w) v = uniform01(rng);
  return ExactDistribution::from_weights(q, p, w);
}

}  // namespace

TEST_CASE("tv examples") {
  const ExactDistribution a(1, 2, {0.75, 0.25});
  const ExactDistribution u(1, 2, {0.5, 0.5});
  CHECK(tv(a, u) == doctest::Approx(0.25));
  CHECK(tv(a, a) == 0.0);
  const auto p0 = ExactDistribution::point_mass(2, 2, 0);
  const auto p3 = ExactDistribution::point_mass(2, 2, 3);
  CHECK(tv(p0, p3) == 1.0);
  CHECK_THROWS_AS(tv(a, ExactDistribution::uniform(2, 2)), std::invalid_argument);
}

TEST_CASE("tv is a metric on random triples") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = random_law(3, 2, 3 * seed), b = random_law(3, 2, 3 * seed + 1), c = random_law(3, 2, 3 * seed + 2);
    CHECK(tv(a, b) == doctest::Approx(tv(b, a)));
    CHECK(tv(a, c) <= tv(a, b) + tv(b, c) + 1e-15);
    CHECK(tv(a, b) >= 0.0);
    CHECK(tv(a, b) <= 1.0);
  }
}

TEST_CASE("empirical tv modes agree with the exact table") {
  SampleSet s(2, 2);
  s.add(Configuration{0, 0});
  s.add(Configuration{1, 0});
  s.add(Configuration{1, 0});
  s.add(Configuration{1, 1});
  const auto e = empirical_from_samples(s);
  const ExactDistribution as_exact(2, 2, {0.25, 0.5, 0.0, 0.25});
  const auto u = ExactDistribution::uniform(2, 2);
  CHECK(tv(u, e) == doctest::Approx(tv(u, as_exact)));
  CHECK(tv(e, u) == doctest::Approx(tv(u, as_exact)));
  SampleSet t(2, 2);
  t.add(Configuration{0, 1});
  t.add(Configuration{1, 0});
  const auto f = empirical_from_samples(t);
  // Support {0,1,3} vs {1,2}: |.25| + |.5-.5| + |0-.5| + |.25| over two.
  CHECK(tv(e, f) == doctest::Approx(0.5));
  CHECK(tv(f, e) == doctest::Approx(0.5));
}

TEST_CASE("cross-correlation examples") {
  const auto ones = constant_rows(4, 2, 1, 10);
  const auto c = cross_correlation(ones);
  for (double v : c.values) CHECK(v == 1.0);
  const auto same3 = constant_rows(3, 3, 2, 5);
  for (double v : cross_correlation(same3).values) CHECK(v == 1.0);

  Rng rng(3);
  SampleSet iid(5, 2);
  for (int k = 0; k < 100000; ++k) {
    Configuration x(5);
    for (auto& v : x) v = coin(rng);
    iid.add(x);
  }
  const auto ci = cross_correlation(iid);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      CHECK(ci(i, j) == ci(j, i));
      if (i != j) CHECK(std::abs(ci(i, j)) < 5.0 / std::sqrt(100000.0));
    }
  CHECK_THROWS(cross_correlation(SampleSet(3, 2)));
}

TEST_CASE("cross-correlation entries stay in range") {
  const auto s = sample_exact(exact_distribution(random_potts(4, 3, 1.0, 0.5, 2)), 2000, 3);
  for (double v : cross_correlation(s).values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  const auto b = sample_exact(exact_distribution(random_ising(4, 1.0, 0.5, 2)), 2000, 3);
  for (double v : cross_correlation(b).values) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("cross-correlation error by hand") {
  SampleSet a(2, 2), b(2, 2);
  // a: products +1, +1 -> C12 = 1. b: products +1, -1 -> C12 = 0.
  a.add(Configuration{1, 1});
  a.add(Configuration{0, 0});
  b.add(Configuration{1, 1});
  b.add(Configuration{1, 0});
  CHECK(cross_correlation_error(a, b) == doctest::Approx(1.0));
  CHECK(cross_correlation_error(b, a) == doctest::Approx(1.0));
  CHECK(cross_correlation_error(a, a) == 0.0);
  SampleSet c(3, 2);
  c.add(Configuration{1, 1, 0});
  // C = [., 1, -1; ., ., -1] vs all-ones: mean(|0|, |2|, |2|)
  CHECK(cross_correlation_error(c, constant_rows(3, 2, 1, 1)) == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("exact cross-correlation matches large samples") {
  const auto mu = exact_distribution(random_ising(4, 0.8, 0.3, 6));
  const auto s = sample_exact(mu, 200000, 1);
  CHECK(cross_correlation_error(cross_correlation(s), cross_correlation(mu)) < 0.01);
}

TEST_CASE("mmd of a set with itself is near zero and order invariant") {
  const auto mu = exact_distribution(random_ising(6, 0.5, 0.3, 1));
  const auto a = sample_exact(mu, 1500, 1);
  const auto r = mmd(a, a);
  CHECK(std::abs(r.value) < 4.0 / 1500);
  CHECK(r.parameters.at("bandwidth_rule") == "median");
  const auto b = sample_exact(mu, 1500, 2);
  const auto ab = mmd(a, b, 2.0);
  CHECK(ab.value >= -4.0 / 1500);
  // Reverse the row order of b.
  SampleSet rb(6, 2);
  for (std::size_t i = b.size(); i-- > 0;) rb.add(b.row(i));
  CHECK(mmd(a, rb, 2.0).value == doctest::Approx(ab.value).epsilon(1e-10));
  CHECK(mmd(a, b, 2.0).value == doctest::Approx(mmd(b, a, 2.0).value).epsilon(1e-10));
}

TEST_CASE("mmd between opposite point masses has the closed form") {
  const int q = 5;
  const double h = 3.0;
  const auto a = constant_rows(q, 2, 0, 300);
  const auto b = constant_rows(q, 2, 1, 300);
  // |x - y|^2 = 4q on spins.
  CHECK(mmd(a, b, h).value == doctest::Approx(2.0 * (1.0 - std::exp(-2.0 * q / (h * h)))).epsilon(1e-12));
  CHECK_THROWS_AS(mmd(a, a), std::domain_error);
  CHECK_THROWS_AS(mmd(a, b, 0.0), std::domain_error);
  CHECK_THROWS(mmd(SampleSet(q, 2), b));
}

TEST_CASE("metric reports serialize") {
  const auto a = constant_rows(3, 3, 0, 4);
  const auto b = constant_rows(3, 3, 1, 4);
  const auto j = mmd(a, b, 1.0).to_json();
  CHECK(j.find("\"metric\":\"mmd\"") != std::string::npos);
  CHECK(j.find("centered-indicator") != std::string::npos);
}
