#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "ndiff/forward.hpp"
#include "ndiff/metrics.hpp"

using namespace ndiff;

TEST_CASE("schedule parameters and round-robin coordinates") {
  const NoiseSchedule s(3, 4, 7, 0.2);
  CHECK(s.a() == doctest::Approx(0.2));
  CHECK(s.b() == doctest::Approx(0.4));
  CHECK(s.b() + (s.p() - 1) * s.a() == doctest::Approx(1.0));
  CHECK(s.coordinate_at(0) == 1);
  CHECK(s.coordinate_at(2) == 3);
  CHECK(s.coordinate_at(3) == 1);
  CHECK(s.coordinate_at(6) == 1);
  CHECK_THROWS_AS(s.coordinate_at(7), std::out_of_range);
  CHECK_THROWS_AS(s.coordinate_at(-1), std::out_of_range);
  CHECK(NoiseSchedule::from_sweeps(5, 2, 3, 0.5).steps() == 15);
  CHECK_THROWS(NoiseSchedule(3, 2, 3, 1.5));
}

TEST_CASE("forward kernel rows are distributions") {
  const NoiseSchedule s(3, 3, 6, 0.35);
  const auto row = forward_kernel_row(s, 4, Configuration{2, 0, 1});
  double total = 0.0;
  for (double v : row) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(row[0] == doctest::Approx(s.b()));  // site 2 currently holds 0
}

TEST_CASE("push-forward matches a dense transition matrix") {
  const int q = 3, p = 2;
  const NoiseSchedule s(q, p, 5, 0.3);
  const auto mu = exact_distribution(random_ising(q, 0.7, 0.4, 2));
  for (int n = 0; n < s.steps(); ++n) {
    const auto out = push_forward_exact(mu, s, n);
    const int u = s.coordinate_at(n);
    for (StateIndex j = 0; j < mu.size(); ++j) {
      const auto y = decode_config(j, q, p);
      double acc = 0.0;
      for (StateIndex i = 0; i < mu.size(); ++i) {
        const auto x = decode_config(i, q, p);
        bool others_equal = true;
        for (int v = 0; v < q; ++v)
          if (v != u - 1 && x[v] != y[v]) others_equal = false;
        if (!others_equal) continue;
        acc += mu[i] * (x[u - 1] == y[u - 1] ? s.b() : s.a());
      }
      CHECK(out[j] == doctest::Approx(acc).epsilon(1e-14));
    }
  }
}

TEST_CASE("full mixing and identity limits") {
  const GibbsModel m = random_ising(3, 0.9, 0.5, 4);
  CHECK(mixing_tv(m, NoiseSchedule(3, 2, 3, 0.0)) < 1e-14);
  const auto mu0 = exact_distribution(m);
  const auto uniform = ExactDistribution::uniform(3, 2);
  CHECK(mixing_tv(m, NoiseSchedule(3, 2, 0, 0.3)) == doctest::Approx(tv(mu0, uniform)));
  // epsilon = 1 never moves.
  CHECK(mixing_tv(m, NoiseSchedule(3, 2, 9, 1.0)) == doctest::Approx(tv(mu0, uniform)));
  // Mixing improves with more sweeps.
  CHECK(mixing_tv(m, NoiseSchedule::from_sweeps(3, 2, 3, 0.5)) < mixing_tv(m, NoiseSchedule::from_sweeps(3, 2, 1, 0.5)));
}

TEST_CASE("forward marginals are normalized and end at mu_T") {
  const auto mu0 = exact_distribution(random_potts(2, 3, 0.8, 0.2, 6));
  const NoiseSchedule s(2, 3, 4, 0.4);
  const auto ms = forward_marginals(mu0, s);
  CHECK(ms.size() == 5);
  for (const auto& m : ms) {
    double t = 0.0;
    for (double v : m.probs()) t += v;
    CHECK(t == doctest::Approx(1.0).epsilon(1e-13));
  }
  CHECK(tv(ms[0], mu0) == 0.0);
}

TEST_CASE("Monte Carlo noising agrees with the exact push-forward") {
  const int q = 3, p = 3;
  const NoiseSchedule s(q, p, 4, 0.3);
  const Configuration start{2, 0, 1};
  const auto mu0 = ExactDistribution::point_mass(q, p, encode_config(start, p));
  const auto ms = forward_marginals(mu0, s);
  Rng rng(99);
  SampleSet out(q, p);
  for (int k = 0; k < 200000; ++k) {
    const auto traj = noise_trajectory(start, s.steps(), s, rng);
    out.add(traj.back());
  }
  CHECK(tv(ms.back(), empirical_from_samples(out)) < 0.01);
}

TEST_CASE("epsilon = 1 trajectories are constant") {
  const NoiseSchedule s(4, 2, 8, 1.0);
  Rng rng(1);
  const Configuration x{1, 0, 1, 1};
  const auto traj = noise_trajectory(x, 8, s, rng);
  CHECK(traj.size() == 9);
  for (const auto& c : traj) CHECK(c == x);
}
