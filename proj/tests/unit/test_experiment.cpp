#include <sstream>

#include "doctest.h"
#include "ndiff/error.hpp"
#include "ndiff/experiment.hpp"

using namespace ndiff;

TEST_CASE("config parsing") {
  std::istringstream in(
      "[model]\ntype = ea-potts\nL = 2\np = 3\n"
      "[schedule]\nepsilon = 0.25\nsweeps = 3\n"
      "[train]\nwidth = 32\ntopology = global\n"
      "[experiment]\nn_train_grid = 100, 1e3\ntrials = 2\n"
      "[run]\nseed = 42\n");
  const auto c = ExperimentConfig::parse(in);
  CHECK(c.model.type == "ea-potts");
  CHECK(c.model.p == 3);
  CHECK(c.epsilon == 0.25);
  CHECK(c.sweeps == 3);
  CHECK(c.train.width == 32);
  CHECK(c.train.topology == Topology::Global);
  CHECK(c.train.epochs == 5);
  CHECK(c.experiment.n_train_grid == std::vector<std::size_t>{100, 1000});
  CHECK(c.seed == 42);
}

TEST_CASE("config errors") {
  for (const char* text : {"[model]\ncolour = red\n", "[extras]\na = 1\n", "[schedule]\nepsilon = 2\n",
                           "[schedule]\nepsilon = lots\n", "[train]\ndepth = 9\n", "[model]\ntype = heisenberg\n",
                           "[data]\nsampler = magic\n"}) {
    std::istringstream in(text);
    CHECK_THROWS_AS(ExperimentConfig::parse(in), ConfigError);
  }
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/ndiff.ini"), IoError);
}

TEST_CASE("resolved config round trips") {
  ExperimentConfig c;
  c.model.type = "ea-potts";
  c.epsilon = 0.375;
  c.train.learning_rate = 0.0031;
  c.train.cosine_decay = false;
  c.experiment.n_train_grid = {10, 20};
  c.seed = 7;
  std::istringstream in(c.to_ini());
  const auto d = ExperimentConfig::parse(in);
  CHECK(d.to_ini() == c.to_ini());
  CHECK(d.epsilon == 0.375);
  CHECK(d.train.learning_rate == 0.0031);
  CHECK(!d.train.cosine_decay);
  CHECK(d.experiment.n_train_grid == c.experiment.n_train_grid);
}

TEST_CASE("size lists") {
  CHECK(parse_size_list("100,316, 1e3") == std::vector<std::size_t>{100, 316, 1000});
  CHECK_THROWS_AS(parse_size_list(""), ConfigError);
  CHECK_THROWS_AS(parse_size_list("10,abc"), ConfigError);
  CHECK_THROWS_AS(parse_size_list("0"), ConfigError);
}

TEST_CASE("summaries use the median and the sample deviation") {
  std::vector<ResultRow> rows;
  for (double v : {3.0, 1.0, 2.0}) rows.push_back({"a", 0, 0, 10, "tv", v, 0, 0.0});
  rows.push_back({"a", 0, 0, 20, "tv", 5.0, 0, 0.0});
  const auto s = summarize(rows);
  REQUIRE(s.size() == 2);
  CHECK(s[0].median == 2.0);
  CHECK(s[0].stddev == doctest::Approx(1.0));
  CHECK(s[0].count == 3);
  CHECK(s[1].stddev == 0.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  std::ostringstream os;
  write_summary_csv(os, s);
  CHECK(os.str().rfind("variant,", 0) == 0);
}

TEST_CASE("built models and data") {
  ModelSpec spec;
  spec.L = 2;
  const auto m = build_model(spec);
  CHECK(num_sites(m) == 4);
  CHECK(alphabet_size(m) == 2);
  spec.type = "ea-potts";
  CHECK(alphabet_size(build_model(spec)) == 3);
  const auto d = generate_data(m, 50, DataSpec{}, 3, kDefaultGuardBits);
  CHECK(d.size() == 50);
  DataSpec exact;
  exact.sampler = "exact";
  CHECK_THROWS_AS(generate_data(m, 5, exact, 1, 2), GuardError);
  DataSpec gl;
  gl.sampler = "glauber";
  CHECK(generate_data(m, 20, gl, 1, 2).size() == 20);
}
