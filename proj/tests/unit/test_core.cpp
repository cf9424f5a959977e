#include <sstream>

#include "doctest.h"
#include "ndiff/core.hpp"
#include "ndiff/error.hpp"

using namespace ndiff;

TEST_CASE("encode/decode round trip over a mixed-radix space") {
  const int q = 4, p = 3;
  const StateIndex n = state_count(q, p);
  CHECK(n == 81);
  for (StateIndex i = 0; i < n; ++i) CHECK(encode_config(decode_config(i, q, p), p) == i);
  // Site 1 is the least significant digit.
  CHECK(encode_config(Configuration{1, 0, 0, 0}, p) == 1);
  CHECK(encode_config(Configuration{0, 1, 0, 0}, p) == 3);
  CHECK(site_stride(3, p) == 9);
}

TEST_CASE("invalid configurations are rejected") {
  CHECK_THROWS_AS(check_config(Configuration{0, 2}, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(check_config(Configuration{0}, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(check_alphabet(1), std::invalid_argument);
  CHECK_THROWS_AS(decode_config(8, 3, 2), std::out_of_range);
}

TEST_CASE("state count overflow and guard") {
  CHECK(state_count(62, 2) == (StateIndex{1} << 62));
  CHECK_THROWS_AS(state_count(63, 2), std::overflow_error);
  CHECK_THROWS_AS(state_count(40, 3), std::overflow_error);
  CHECK(within_guard(24, 2, 24));
  CHECK_FALSE(within_guard(25, 2, 24));
  CHECK_THROWS_AS(check_guard(16, 3, 24), GuardError);
  CHECK_NOTHROW(check_guard(15, 3, 24));
}

TEST_CASE("hamming distance") {
  CHECK(hamming_distance(Configuration{0, 1, 2}, Configuration{0, 2, 1}) == 2);
  CHECK(hamming_distance(Configuration{0, 1}, Configuration{0, 1}) == 0);
}

TEST_CASE("exact distribution construction and marginals") {
  CHECK_THROWS(ExactDistribution(1, 2, {0.5, 0.6}));
  CHECK_THROWS(ExactDistribution(1, 2, {1.5, -0.5}));
  const auto u = ExactDistribution::uniform(3, 2);
  CHECK(u.size() == 8);
  CHECK(u[5] == doctest::Approx(0.125));
  const auto pm = ExactDistribution::point_mass(2, 3, 4);
  CHECK(pm[4] == 1.0);
  const auto w = ExactDistribution::from_weights(2, 2, {1, 1, 1, 5});
  // Site 1 is 1 at indices 1 and 3.
  const auto m1 = w.site_marginal(1);
  CHECK(m1[1] == doctest::Approx(6.0 / 8.0));
  const std::vector<double> lw = {1000.0, 1000.0};
  const auto big = ExactDistribution::from_log_weights(1, 2, lw);
  CHECK(big[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(ExactDistribution::uniform(30, 2), GuardError);
}

TEST_CASE("sample set add, slice and fingerprint") {
  SampleSet s(3, 2, "test");
  s.add(Configuration{0, 1, 1});
  s.add(Configuration{1, 1, 0});
  CHECK(s.size() == 2);
  CHECK(s.row(1)[0] == 1);
  CHECK_THROWS(s.add(Configuration{0, 2, 0}));
  const auto t = s.slice(1, 2);
  CHECK(t.size() == 1);
  CHECK(t.row(0)[2] == 0);
  SampleSet s2(3, 2);
  s2.add(Configuration{0, 1, 1});
  s2.add(Configuration{1, 1, 0});
  CHECK(s.fingerprint() == s2.fingerprint());
  s2.add(Configuration{0, 0, 0});
  CHECK(s.fingerprint() != s2.fingerprint());
}

TEST_CASE("empirical distribution counts") {
  SampleSet s(2, 2);
  s.add(Configuration{1, 0});
  s.add(Configuration{1, 0});
  s.add(Configuration{0, 1});
  const auto e = empirical_from_samples(s);
  CHECK(e.total == 3);
  CHECK(e.probability(1) == doctest::Approx(2.0 / 3.0));
  CHECK(e.probability(0) == 0.0);
  CHECK_THROWS(empirical_from_samples(SampleSet(2, 2)));
}

TEST_CASE("sample file round trip keeps header and provenance") {
  SampleSet s(4, 3, "sampler=exact seed=7");
  s.add(Configuration{0, 1, 2, 0});
  s.add(Configuration{2, 2, 1, 1});
  std::stringstream buf;
  write_samples(buf, s);
  CHECK(buf.str().rfind("q=4 p=3\n", 0) == 0);
  const auto back = read_samples(buf);
  CHECK(back.q() == 4);
  CHECK(back.p() == 3);
  CHECK(back.provenance() == "sampler=exact seed=7");
  CHECK(back.fingerprint() == s.fingerprint());
}

TEST_CASE("raw CSV ingestion infers p unless given") {
  std::stringstream csv("0,1,1\n1,0,2\n");
  const auto s = read_samples(csv);
  CHECK(s.q() == 3);
  CHECK(s.p() == 3);
  CHECK(s.size() == 2);
  std::stringstream csv2("0,1\n1,1\n");
  CHECK(read_samples(csv2, 4).p() == 4);
  std::stringstream ragged("0,1\n1\n");
  CHECK_THROWS_AS(read_samples(ragged), IoError);
  std::stringstream bad("q=2 p=2\n0 5\n");
  CHECK_THROWS_AS(read_samples(bad), IoError);
  CHECK_THROWS_AS(read_samples(std::filesystem::path("/nonexistent/file.txt")), IoError);
}
