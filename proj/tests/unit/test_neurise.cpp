#include <cmath>
#include <stdexcept>
#include <sstream>

#include "doctest.h"
#include "ndiff/error.hpp"
#include "ndiff/experiment.hpp"
#include "ndiff/metrics.hpp"
#include "ndiff/neurise.hpp"
#include "ndiff/parallel.hpp"

using namespace ndiff;

namespace {

std::vector<LossSample> random_batch(const NoiseSchedule& s, int size, Rng& rng) {
  std::vector<LossSample> batch;
  for (int k = 0; k < size; ++k) {
    LossSample ls;
    ls.step = uniform_below(rng, s.steps());
    ls.site = s.coordinate_at(ls.step);
    ls.config.resize(static_cast<std::size_t>(s.q()));
    for (auto& v : ls.config) v = uniform_below(rng, s.p());
    batch.push_back(ls);
  }
  return batch;
}

ConditionalModel zero_model(const NoiseSchedule& s, Topology t) {
  TrainConfig c;
  c.topology = t;
  Rng rng(0);
  auto m = ConditionalModel::initialized(s, c, rng);
  for (auto& net : m.networks())
    for (auto& v : net.params()) v = 0.0;
  return m;
}

}  // namespace

TEST_CASE("phi is a centered indicator") {
  for (int p : {2, 3, 5}) {
    for (int r = 0; r < p; ++r) {
      const auto v = phi(r, p);
      double sum = 0.0;
      for (double x : v) sum += x;
      CHECK(std::abs(sum) < 1e-15);
      CHECK(v[r] == doctest::Approx(1.0 - 1.0 / p));
    }
    // Energies <Phi(r), y> sum to zero over r for any y.
    const std::vector<double> y = {0.3, -1.2, 2.0, 0.1, 0.7};
    double total = 0.0;
    for (int r = 0; r < p; ++r) {
      const auto v = phi(r, p);
      for (int s = 0; s < p; ++s) total += v[s] * y[s];
    }
    CHECK(std::abs(total) < 1e-12);
  }
  CHECK_THROWS(phi(2, 2));
}

TEST_CASE("input encoding") {
  const NoiseSchedule s(3, 2, 6, 0.5);
  const auto x = encode_input(3, 2, Configuration{0, 1, 1}, s);
  const std::vector<double> expect = {0.5, 0, 1, 0, -1, 1};
  CHECK(x == expect);
  CHECK(encode_input(0, 1, Configuration{0, 0, 0}, s)[0] == 0.0);
  CHECK(encode_input(6, 1, Configuration{0, 0, 0}, s)[0] == 1.0);
  const NoiseSchedule s3(3, 3, 3, 0.5);
  CHECK(input_dim(3, 3) == 1 + 3 + 6);
  const auto y = encode_input(0, 3, Configuration{2, 0, 1}, s3);
  CHECK(y[4] == doctest::Approx(-1.0 / 3));
  CHECK(y[6] == doctest::Approx(2.0 / 3));
  CHECK_THROWS(encode_input(0, 4, Configuration{0, 0, 0}, s3));
}

TEST_CASE("zero network: loss is one and the conditional is uniform") {
  const NoiseSchedule s(3, 3, 6, 0.2);
  const auto m = zero_model(s, Topology::PerStep);
  Rng rng(1);
  CHECK(neurise_loss(m, random_batch(s, 10, rng)) == 1.0);
  const auto c = m.conditional(2, 3, Configuration{0, 1, 2});
  for (double v : c) CHECK(v == doctest::Approx(1.0 / 3));
  CHECK_THROWS(neurise_loss(m, std::vector<LossSample>{}));
}

TEST_CASE("loss on a two-sample batch matches a scalar recomputation") {
  const NoiseSchedule s(2, 3, 2, 0.4);
  TrainConfig cfg;
  cfg.width = 3;
  cfg.topology = Topology::Global;
  Rng rng(8);
  const auto m = ConditionalModel::initialized(s, cfg, rng);
  const std::vector<LossSample> batch = {{0, 1, {2, 1}}, {1, 2, {0, 0}}};
  double expect = 0.0;
  for (const auto& b : batch) {
    std::vector<double> y(3);
    m.energies(b.step, b.site, b.config, y);
    const auto f = phi(b.config[b.site - 1], 3);
    expect += std::exp(-(f[0] * y[0] + f[1] * y[1] + f[2] * y[2]));
  }
  CHECK(neurise_loss(m, batch) == doctest::Approx(expect / 2).epsilon(1e-14));
}

TEST_CASE("loss decreases when the output moves along Phi(target)") {
  const NoiseSchedule s(2, 2, 2, 0.4);
  auto m = zero_model(s, Topology::Global);
  const std::vector<LossSample> batch = {{0, 1, {1, 0}}};
  double prev = neurise_loss(m, batch);
  auto& out_bias = m.networks()[0].layers().back();
  for (double t : {0.5, 1.0, 4.0}) {
    m.networks()[0].params()[out_bias.bias + 1] = t;
    const double l = neurise_loss(m, batch);
    CHECK(l < prev);
    prev = l;
  }
  CHECK(prev < 0.2);
}

TEST_CASE("conditional ratios follow the energy differences") {
  const NoiseSchedule s(3, 3, 3, 0.3);
  TrainConfig cfg;
  cfg.width = 8;
  Rng rng(2);
  const auto m = ConditionalModel::initialized(s, cfg, rng);
  const Configuration x{1, 2, 0};
  std::vector<double> y(3);
  m.energies(1, 2, x, y);
  const auto c = m.conditional(1, 2, x);
  CHECK(c[0] + c[1] + c[2] == doctest::Approx(1.0).epsilon(1e-12));
  const auto f0 = phi(0, 3), f2 = phi(2, 3);
  double d = 0.0;
  for (int k = 0; k < 3; ++k) d += (f2[k] - f0[k]) * y[k];
  CHECK(c[2] / c[0] == doctest::Approx(std::exp(d)).epsilon(1e-12));
}

TEST_CASE("conditionals stay normalized for extreme parameters") {
  const NoiseSchedule s(2, 3, 2, 0.3);
  TrainConfig cfg;
  cfg.width = 8;
  Rng rng(3);
  auto m = ConditionalModel::initialized(s, cfg, rng);
  for (auto& v : m.networks()[0].params()) v *= 300.0;
  const auto c = m.conditional(0, 1, Configuration{1, 2});
  CHECK(c[0] + c[1] + c[2] == doctest::Approx(1.0).epsilon(1e-9));
  m.networks()[0].params()[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(m.conditional(0, 1, Configuration{1, 2}), std::runtime_error);
}

TEST_CASE("loss gradient matches central differences per parameter group") {
  for (Topology topo : {Topology::PerStep, Topology::Global})
    for (int depth = 1; depth <= 3; ++depth)
      for (int width : {8, 16}) {
        const NoiseSchedule s(3, 3, 6, 0.3);
        TrainConfig cfg;
        cfg.depth = depth;
        cfg.width = width;
        cfg.topology = topo;
        Rng rng(static_cast<std::uint64_t>(depth * 100 + width));
        auto m = ConditionalModel::initialized(s, cfg, rng);
        const auto batch = random_batch(s, 12, rng);
        const double wd = 1e-3;
        const auto g = loss_gradient(m, batch, wd);
        for (std::size_t k = 0; k < m.networks().size(); ++k) {
          auto& net = m.networks()[k];
          for (const auto& grp : net.param_groups()) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = grp.offset; i < grp.offset + grp.size; ++i) {
              const double keep = net.params()[i];
              net.params()[i] = keep + 1e-4;
              const double up = regularized_loss(m, batch, wd);
              net.params()[i] = keep - 1e-4;
              const double down = regularized_loss(m, batch, wd);
              net.params()[i] = keep;
              const double fd = (up - down) / 2e-4;
              num += (g.networks[k][i] - fd) * (g.networks[k][i] - fd);
              den += fd * fd;
            }
            CHECK_MESSAGE(std::sqrt(num) <= 1e-4 * std::max(std::sqrt(den), 1e-6), grp.name);
          }
        }
      }
}

TEST_CASE("weight decay gradient alone is decay times parameter") {
  const NoiseSchedule s(2, 2, 2, 0.3);
  TrainConfig cfg;
  cfg.width = 4;
  Rng rng(4);
  const auto m = ConditionalModel::initialized(s, cfg, rng);
  // Steps absent from the batch receive only the decay term.
  const std::vector<LossSample> batch = {{0, 1, {0, 1}}};
  const auto g = loss_gradient(m, batch, 0.1);
  const auto params = m.networks()[1].params();
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(g.networks[1][i] == doctest::Approx(0.1 * params[i]));
}

TEST_CASE("noised data follows the forward marginals") {
  const int q = 3, p = 2;
  const NoiseSchedule s(q, p, 7, 0.3);
  const Configuration x0{1, 0, 1};
  SampleSet data(q, p);
  for (int k = 0; k < 60000; ++k) data.add(x0);
  const NoisedData nd(data, s, 12);
  const auto ms = forward_marginals(ExactDistribution::point_mass(q, p, encode_config(x0, p)), s);
  Configuration buf(q);
  for (int n : {0, 1, 4, 7}) {
    SampleSet at(q, p);
    for (std::size_t r = 0; r < nd.rows(); ++r) {
      nd.state_at(r, n, buf);
      at.add(buf);
    }
    CHECK(tv(ms[n], empirical_from_samples(at)) < 0.015);
  }
  // Epsilon = 1: every step sees the clean row.
  const NoiseSchedule still(q, p, 6, 1.0);
  const NoisedData nd1(data.slice(0, 10), still, 3);
  for (int n = 0; n <= 6; ++n) {
    nd1.state_at(4, n, buf);
    CHECK(buf == x0);
  }
}

TEST_CASE("single spin: learned conditional matches the closed form") {
  const IsingModel m(1, {}, {0.3});
  const auto data = sample_exact(exact_distribution(m), 100000, 5);
  const NoiseSchedule s(1, 2, 1, 1.0);
  TrainConfig cfg;
  cfg.width = 16;
  cfg.epochs = 5;
  cfg.seed = 3;
  const auto model = train(data, s, cfg);
  const double expect = std::exp(0.3) / (std::exp(0.3) + std::exp(-0.3));
  CHECK(std::abs(model.conditional(0, 1, Configuration{0})[1] - expect) < 0.01);
}

TEST_CASE("independent sites: learned conditionals match the noised marginals") {
  const IsingModel m(3, {}, {0.4, -0.2, 0.7});
  const auto data = sample_exact(exact_distribution(m), 100000, 6);
  const NoiseSchedule s(3, 2, 3, 0.5);
  TrainConfig cfg;
  cfg.width = 16;
  cfg.epochs = 5;
  cfg.seed = 4;
  const auto model = train(data, s, cfg);
  const auto truth = ExactOracle::from_model(m, s);
  for (int n = 0; n < s.steps(); ++n) {
    const int u = s.coordinate_at(n);
    for (StateIndex i = 0; i < 8; ++i) {
      const auto x = decode_config(i, 3, 2);
      const auto a = model.conditional(n, u, x);
      const auto b = truth.conditional(n, u, x);
      CHECK(std::abs(a[1] - b[1]) < 0.02);
    }
  }
}

TEST_CASE("training lowers held-out loss and is deterministic") {
  const GibbsModel g = random_ising(4, 0.8, 0.3, 14);
  const auto mu = exact_distribution(g);
  const auto fit = sample_exact(mu, 2000, 1);
  const auto held = sample_exact(mu, 1000, 2);
  const auto s = NoiseSchedule::from_sweeps(4, 2, 1, 0.3);
  TrainConfig cfg;
  cfg.width = 16;
  cfg.epochs = 3;
  cfg.seed = 9;
  Rng rng(cfg.seed);
  const auto init = ConditionalModel::initialized(s, cfg, rng);
  TrainLog log;
  const auto trained = train(fit, s, cfg, &log);
  const NoisedData nd(held, s, 77);
  CHECK(validation_loss(trained, nd) <= validation_loss(init, nd));
  CHECK(!log.curve.empty());

  omp_set_num_threads(4);
  const auto again = train(fit, s, cfg);
  omp_set_num_threads(1);
  for (std::size_t k = 0; k < trained.networks().size(); ++k)
    CHECK(std::equal(trained.networks()[k].params().begin(), trained.networks()[k].params().end(),
                     again.networks()[k].params().begin()));
  CHECK_THROWS(train(SampleSet(4, 2), s, cfg));
  CHECK_THROWS(train(sample_exact(exact_distribution(random_ising(3, 1, 1, 1)), 10, 1), s, cfg));
}

TEST_CASE("global and per-step models share the oracle contract") {
  const auto s = NoiseSchedule::from_sweeps(3, 3, 1, 0.3);
  for (Topology t : {Topology::PerStep, Topology::Global}) {
    TrainConfig cfg;
    cfg.width = 8;
    cfg.topology = t;
    Rng rng(1);
    const auto m = ConditionalModel::initialized(s, cfg, rng);
    CHECK(m.networks().size() == (t == Topology::Global ? 1u : 3u));
    const auto smp = reverse_sample(m, s, 100, UniformInit{}, 3);
    CHECK(smp.size() == 100);
    CHECK(m.q() == 3);
    CHECK(m.steps() == 3);
  }
  CHECK(parse_topology("global") == Topology::Global);
  CHECK(parse_topology("per-step") == Topology::PerStep);
  CHECK_THROWS_AS(parse_topology("mesh"), ConfigError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.depth = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  const auto s = NoiseSchedule::from_sweeps(3, 3, 2, 0.25);
  TrainConfig cfg;
  cfg.width = 8;
  cfg.depth = 2;
  cfg.seed = 1234;
  Rng rng(5);
  const auto m = ConditionalModel::initialized(s, cfg, rng);
  std::stringstream buf;
  save_checkpoint(buf, m, CheckpointInfo{cfg, 0xabcdefULL});
  CHECK(buf.str().substr(0, 8) == "NDIFFCK1");
  CheckpointInfo info;
  const auto back = load_checkpoint(buf, &info);
  CHECK(back.schedule() == s);
  CHECK(back.topology() == Topology::PerStep);
  CHECK(info.data_fingerprint == 0xabcdefULL);
  CHECK(info.config.seed == 1234);
  CHECK(info.config.depth == 2);
  for (std::size_t k = 0; k < m.networks().size(); ++k)
    CHECK(std::equal(m.networks()[k].params().begin(), m.networks()[k].params().end(),
                     back.networks()[k].params().begin()));
  std::string bytes = buf.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(truncated), IoError);
  std::stringstream junk("NOTACHECKPOINT");
  CHECK_THROWS_AS(load_checkpoint(junk), IoError);
}

TEST_CASE("random search") {
  const auto mu = exact_distribution(random_ising(3, 0.8, 0.3, 2));
  const auto data = sample_exact(mu, 400, 1);
  const auto s = NoiseSchedule::from_sweeps(3, 2, 1, 0.3);
  SearchOptions opts;
  opts.epochs = 1;
  opts.max_depth = 2;
  opts.max_width = 64;
  const auto one = random_search(data, s, 1, 5, opts);
  CHECK(one.trials.size() == 1);
  CHECK(one.trials[0].config.width == one.best_config.width);
  CHECK(one.trials[0].config.learning_rate == one.best_config.learning_rate);

  opts.tune_schedule = true;
  const auto a = random_search(data, s, 4, 6, opts);
  const auto b = random_search(data, s, 4, 6, opts);
  std::vector<double> losses;
  for (std::size_t k = 0; k < a.trials.size(); ++k) {
    CHECK(a.trials[k].validation_loss == b.trials[k].validation_loss);
    CHECK(a.trials[k].schedule == b.trials[k].schedule);
    losses.push_back(a.trials[k].validation_loss);
    CHECK(a.trials[k].config.learning_rate >= 1e-4);
    CHECK(a.trials[k].config.learning_rate <= 5e-2);
    CHECK(a.trials[k].schedule.steps() % 3 == 0);
  }
  double best = losses[0];
  for (double l : losses) best = std::min(best, l);
  CHECK(best <= median(losses));
  CHECK_THROWS(random_search(data, s, 0, 1, opts));
}
