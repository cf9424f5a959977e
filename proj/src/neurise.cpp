#include "ndiff/neurise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ndiff/error.hpp"
#include "ndiff/kernels.hpp"

namespace ndiff {

std::vector<double> phi(int r, int p) {
  check_alphabet(p);
  if (r < 0 || r >= p) throw std::out_of_range("phi: symbol outside the alphabet");
  std::vector<double> v(static_cast<std::size_t>(p), -1.0 / p);
  v[r] += 1.0;
  return v;
}

int context_dim(int q, int p) { return p == 2 ? q - 1 : (q - 1) * p; }

int input_dim(int q, int p) { return 1 + q + context_dim(q, p); }

void encode_input(int n, int u, std::span<const Symbol> config, const NoiseSchedule& schedule, std::span<double> out) {
  const int q = schedule.q();
  const int p = schedule.p();
  if (static_cast<int>(out.size()) != input_dim(q, p)) throw std::invalid_argument("encode_input: output size");
  if (u < 1 || u > q) throw std::out_of_range("encode_input: site out of range");
  out[0] = schedule.steps() > 0 ? static_cast<double>(n) / schedule.steps() : 0.0;
  for (int i = 0; i < q; ++i) out[1 + i] = (i == u - 1) ? 1.0 : 0.0;
  std::size_t k = static_cast<std::size_t>(1 + q);
  const double inv_p = 1.0 / p;
  for (int v = 0; v < q; ++v) {
    if (v == u - 1) continue;
    if (p == 2) {
      out[k++] = 2.0 * config[v] - 1.0;
    } else {
      for (int s = 0; s < p; ++s) out[k++] = (s == config[v] ? 1.0 : 0.0) - inv_p;
    }
  }
}

std::vector<double> encode_input(int n, int u, std::span<const Symbol> config, const NoiseSchedule& schedule) {
  check_config(config, schedule.q(), schedule.p());
  std::vector<double> out(static_cast<std::size_t>(input_dim(schedule.q(), schedule.p())));
  encode_input(n, u, config, schedule, out);
  return out;
}

std::string to_string(Topology t) { return t == Topology::Global ? "global" : "per-step"; }

Topology parse_topology(const std::string& s) {
  if (s == "global") return Topology::Global;
  if (s == "per-step" || s == "per_step" || s == "local") return Topology::PerStep;
  throw ConfigError("unknown topology '" + s + "' (expected global or per-step)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (depth < 1 || depth > 5) fail("depth must be in 1..5");
  if (width < 1 || width > 4096) fail("width must be in 1..4096");
  if (!(learning_rate > 0.0) || learning_rate > 1.0) fail("learning rate must be in (0, 1]");
  if (!(weight_decay >= 0.0) || weight_decay > 1.0) fail("weight decay must be in [0, 1]");
  if (batch_size < 1) fail("batch size must be positive");
  if (epochs < 0 || min_steps < 0) fail("epochs and min_steps must be non-negative");
}

// ---------------------------------------------------------------------------

ConditionalModel::ConditionalModel(NoiseSchedule schedule, Topology topology, std::vector<Mlp> networks)
    : schedule_(schedule), topology_(topology), networks_(std::move(networks)) {
  const MlpShape expected{input_dim(schedule_.q(), schedule_.p()), 0, 0, schedule_.p()};
  const std::size_t want = topology_ == Topology::Global ? 1 : static_cast<std::size_t>(std::max(1, schedule_.steps()));
  if (networks_.size() != want)
    throw std::invalid_argument("ConditionalModel: expected " + std::to_string(want) + " networks");
  for (const auto& net : networks_)
    if (net.shape().input_dim != expected.input_dim || net.shape().output_dim != expected.output_dim)
      throw std::invalid_argument("ConditionalModel: network shape does not match (q, p)");
}

ConditionalModel ConditionalModel::initialized(const NoiseSchedule& schedule, const TrainConfig& config, Rng& rng) {
  config.validate();
  const MlpShape shape{input_dim(schedule.q(), schedule.p()), config.width, config.depth, schedule.p()};
  const int count = config.topology == Topology::Global ? 1 : std::max(1, schedule.steps());
  std::vector<Mlp> nets;
  nets.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) nets.push_back(Mlp::initialized(shape, rng));
  return ConditionalModel(schedule, config.topology, std::move(nets));
}

std::size_t ConditionalModel::network_index(int n) const {
  if (topology_ == Topology::Global) return 0;
  if (n < 0 || static_cast<std::size_t>(n) >= networks_.size())
    throw std::out_of_range("ConditionalModel: step " + std::to_string(n) + " has no network");
  return static_cast<std::size_t>(n);
}

std::size_t ConditionalModel::param_count() const {
  std::size_t total = 0;
  for (const auto& net : networks_) total += net.param_count();
  return total;
}

void ConditionalModel::energies(int n, int u, std::span<const Symbol> config, std::span<double> out) const {
  thread_local std::vector<double> x;
  x.resize(static_cast<std::size_t>(input_dim(q(), p())));
  encode_input(n, u, config, schedule_, x);
  networks_[network_index(n)].forward(x, out);
}

void ConditionalModel::conditional(int n, int u, std::span<const Symbol> config, std::span<double> out) const {
  energies(n, u, config, out);
  const int p = this->p();
  // <Phi(r), y> = y_r - mean(y); the mean cancels in the softmax.
  double max_y = -INFINITY;
  for (int r = 0; r < p; ++r) {
    if (!std::isfinite(out[r])) throw std::runtime_error("ConditionalModel: non-finite network output");
    max_y = std::max(max_y, out[r]);
  }
  double total = 0.0;
  for (int r = 0; r < p; ++r) total += (out[r] = std::exp(out[r] - max_y));
  for (int r = 0; r < p; ++r) out[r] /= total;
}

// ---------------------------------------------------------------------------

namespace {

struct EncodedGroups {
  std::vector<std::vector<double>> features;
  std::vector<std::vector<int>> targets;
};

EncodedGroups encode_batch(const ConditionalModel& model, std::span<const LossSample> batch) {
  if (batch.empty()) throw std::invalid_argument("loss batch is empty");
  const auto d = static_cast<std::size_t>(input_dim(model.q(), model.p()));
  EncodedGroups g;
  g.features.resize(model.networks().size());
  g.targets.resize(model.networks().size());
  std::vector<double> x(d);
  for (const LossSample& s : batch) {
    check_config(s.config, model.q(), model.p());
    const std::size_t k = model.network_index(s.step);
    encode_input(s.step, s.site, s.config, model.schedule(), x);
    g.features[k].insert(g.features[k].end(), x.begin(), x.end());
    g.targets[k].push_back(s.config[s.site - 1]);
  }
  return g;
}

double squared_norm(const ConditionalModel& model) {
  double s = 0.0;
  for (const auto& net : model.networks())
    for (double v : net.params()) s += v * v;
  return s;
}

}  // namespace

double neurise_loss(const ConditionalModel& model, std::span<const LossSample> batch) {
  const EncodedGroups g = encode_batch(model, batch);
  double total = 0.0;
  for (std::size_t k = 0; k < g.targets.size(); ++k)
    if (!g.targets[k].empty()) total += kernels::batch_loss(model.networks()[k], g.features[k], g.targets[k]);
  return total / static_cast<double>(batch.size());
}

double regularized_loss(const ConditionalModel& model, std::span<const LossSample> batch, double weight_decay) {
  return neurise_loss(model, batch) + 0.5 * weight_decay * squared_norm(model);
}

ModelGradient loss_gradient(const ConditionalModel& model, std::span<const LossSample> batch, double weight_decay) {
  const EncodedGroups g = encode_batch(model, batch);
  ModelGradient grad;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < model.networks().size(); ++k) {
    const Mlp& net = model.networks()[k];
    grad.networks.emplace_back(net.param_count(), 0.0);
    if (!g.targets[k].empty()) kernels::batch_gradient(net, g.features[k], g.targets[k], scale, grad.networks[k]);
    const auto params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i) grad.networks[k][i] += weight_decay * params[i];
  }
  return grad;
}

// ---------------------------------------------------------------------------

NoisedData::NoisedData(const SampleSet& data, const NoiseSchedule& schedule, std::uint64_t seed)
    : data_(data), schedule_(schedule) {
  if (data.q() != schedule.q() || data.p() != schedule.p())
    throw std::invalid_argument("NoisedData: samples do not match the schedule");
  const int T = schedule.steps();
  after_.resize(data.size() * static_cast<std::size_t>(T));
  Rng rng(seed);
  Configuration state(static_cast<std::size_t>(data.q()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto row = data.row(i);
    std::copy(row.begin(), row.end(), state.begin());
    for (int k = 0; k < T; ++k) {
      noise_step_inplace(state, k, schedule, rng);
      after_[i * static_cast<std::size_t>(T) + static_cast<std::size_t>(k)] = state[k % data.q()];
    }
  }
}

void NoisedData::state_at(std::size_t row, int n, std::span<Symbol> out) const {
  const int q = schedule_.q();
  const int T = schedule_.steps();
  auto x0 = data_.row(row);
  std::copy(x0.begin(), x0.end(), out.begin());
  for (int v = 0; v < q && v < n; ++v) {
    // Last kernel before n that touched site v+1.
    const int k = v + q * ((n - 1 - v) / q);
    out[v] = after_[row * static_cast<std::size_t>(T) + static_cast<std::size_t>(k)];
  }
}

namespace {

// Training pairs for one network are indexed implicitly: id -> (row, step, site).
struct PairSpace {
  std::size_t rows = 0;
  std::vector<int> steps;
  bool all_sites = false;
  int q = 0;

  std::size_t size() const { return rows * steps.size() * (all_sites ? static_cast<std::size_t>(q) : 1); }
  void decode(std::size_t id, const NoiseSchedule& schedule, std::size_t& row, int& step, int& site) const {
    const std::size_t per_row = size() / rows;
    row = id / per_row;
    std::size_t rest = id % per_row;
    if (all_sites) {
      step = steps[rest / static_cast<std::size_t>(q)];
      site = static_cast<int>(rest % static_cast<std::size_t>(q)) + 1;
    } else {
      step = steps[rest];
      site = schedule.coordinate_at(step);
    }
  }
};

class AdamW {
 public:
  AdamW(std::size_t n, double lr, double wd) : m_(n, 0.0), v_(n, 0.0), lr_(lr), wd_(wd) {}

  void step(std::span<double> params, std::span<const double> grad, double lr_scale) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double lr = lr_ * lr_scale;
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1 * m_[i] + (1.0 - beta1) * grad[i];
      v_[i] = beta2 * v_[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd_ * params[i]);
    }
  }

 private:
  std::vector<double> m_, v_;
  double lr_, wd_;
  long t_ = 0;
};

void train_network(Mlp& net, std::size_t net_index, const PairSpace& pairs, const NoisedData& data,
                   const TrainConfig& config, Rng& rng, TrainLog* log) {
  const NoiseSchedule& schedule = data.schedule();
  const std::size_t n_pairs = pairs.size();
  if (n_pairs == 0) return;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = (n_pairs + batch - 1) / batch;
  const std::size_t total_steps =
      std::max(static_cast<std::size_t>(config.epochs) * steps_per_epoch, static_cast<std::size_t>(config.min_steps));
  const auto d = static_cast<std::size_t>(net.shape().input_dim);

  std::vector<std::size_t> order(n_pairs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> features(batch * d);
  std::vector<int> targets(batch);
  std::vector<double> grad(net.param_count());
  Configuration state(static_cast<std::size_t>(schedule.q()));
  AdamW opt(net.param_count(), config.learning_rate, config.weight_decay);

  std::size_t pos = 0;
  double running = 0.0;
  std::size_t running_count = 0;
  for (std::size_t step = 0; step < total_steps; ++step) {
    if (pos == 0) std::shuffle(order.begin(), order.end(), rng);
    const std::size_t b = std::min(batch, n_pairs - pos);
    for (std::size_t i = 0; i < b; ++i) {
      std::size_t row;
      int n, u;
      pairs.decode(order[pos + i], schedule, row, n, u);
      data.state_at(row, n, state);
      targets[i] = state[u - 1];
      encode_input(n, u, state, schedule, std::span<double>(features).subspan(i * d, d));
    }
    pos = (pos + b == n_pairs) ? 0 : pos + b;
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss_sum = kernels::batch_gradient(net, std::span<const double>(features).first(b * d),
                                                    std::span<const int>(targets).first(b), 1.0 / b, grad);
    const double lr_scale =
        config.cosine_decay ? 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)))
                            : 1.0;
    opt.step(net.params(), grad, lr_scale);
    running += loss_sum;
    running_count += b;
    if (log != nullptr && ((step + 1) % steps_per_epoch == 0 || step + 1 == total_steps)) {
      log->curve.push_back({net_index, step + 1, running / static_cast<double>(running_count)});
      running = 0.0;
      running_count = 0;
    }
  }
}

}  // namespace

ConditionalModel train(const SampleSet& samples, const NoiseSchedule& schedule, const TrainConfig& config,
                       TrainLog* log) {
  config.validate();
  if (samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (samples.q() != schedule.q() || samples.p() != schedule.p())
    throw std::invalid_argument("train: samples do not match the schedule's (q, p)");
  Rng rng(config.seed);
  ConditionalModel model = ConditionalModel::initialized(schedule, config, rng);
  const int T = schedule.steps();
  if (T == 0) return model;

  const NoisedData data(samples, schedule, derive_seed(config.seed, {0x6e6f697365ULL}));
  if (config.topology == Topology::Global) {
    PairSpace pairs{samples.size(), {}, config.all_coordinates, schedule.q()};
    for (int n = 0; n < T; ++n) pairs.steps.push_back(n);
    train_network(model.networks()[0], 0, pairs, data, config, rng, log);
  } else {
    for (int n = 0; n < T; ++n) {
      PairSpace pairs{samples.size(), {n}, config.all_coordinates, schedule.q()};
      train_network(model.networks()[static_cast<std::size_t>(n)], static_cast<std::size_t>(n), pairs, data, config,
                    rng, log);
    }
  }
  return model;
}

double validation_loss(const ConditionalModel& model, const NoisedData& data) {
  if (!(model.schedule() == data.schedule())) throw std::invalid_argument("validation_loss: schedule mismatch");
  const int T = data.schedule().steps();
  if (T == 0 || data.rows() == 0) return 1.0;
  const auto d = static_cast<std::size_t>(input_dim(model.q(), model.p()));
  std::vector<double> features(data.rows() * d);
  std::vector<int> targets(data.rows());
  Configuration state(static_cast<std::size_t>(model.q()));
  double total = 0.0;
  for (int n = 0; n < T; ++n) {
    const int u = data.schedule().coordinate_at(n);
    for (std::size_t i = 0; i < data.rows(); ++i) {
      data.state_at(i, n, state);
      targets[i] = state[u - 1];
      encode_input(n, u, state, data.schedule(), std::span<double>(features).subspan(i * d, d));
    }
    total += kernels::batch_loss(model.networks()[model.network_index(n)], features, targets);
  }
  return total / (static_cast<double>(T) * static_cast<double>(data.rows()));
}

// ---------------------------------------------------------------------------

SearchResult random_search(const SampleSet& samples, const NoiseSchedule& schedule, int budget, std::uint64_t seed,
                           const SearchOptions& options) {
  if (budget < 1) throw std::invalid_argument("random_search: budget must be >= 1");
  if (samples.size() < 2) throw std::invalid_argument("random_search: need at least two samples");
  Rng rng(seed);

  // Shuffled split into training and validation rows.
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_val = static_cast<std::size_t>(std::round(options.validation_fraction * static_cast<double>(samples.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, samples.size() - 1);
  SampleSet val(samples.q(), samples.p()), fit(samples.q(), samples.p(), samples.provenance());
  for (std::size_t k = 0; k < idx.size(); ++k) (k < n_val ? val : fit).add(samples.row(idx[k]));

  auto log_uniform = [&](double lo, double hi) { return std::exp(std::log(lo) + uniform01(rng) * (std::log(hi) - std::log(lo))); };
  static constexpr int kWidths[] = {64, 128, 256, 512};
  static constexpr int kBatches[] = {64, 128, 256, 512};
  static constexpr int kSweeps[] = {2, 4, 6, 8, 10};

  std::vector<SearchTrial> trials;
  std::optional<ConditionalModel> best_model;
  std::size_t best = 0;
  for (int t = 0; t < budget; ++t) {
    TrainConfig cfg;
    cfg.depth = 1 + uniform_below(rng, std::clamp(options.max_depth, 1, 5));
    std::vector<int> widths;
    for (int w : kWidths)
      if (w <= options.max_width) widths.push_back(w);
    if (widths.empty()) widths.push_back(std::max(1, options.max_width));
    cfg.width = widths[static_cast<std::size_t>(uniform_below(rng, static_cast<int>(widths.size())))];
    cfg.learning_rate = log_uniform(1e-4, 5e-2);
    cfg.weight_decay = log_uniform(1e-8, 1e-3);
    cfg.batch_size = kBatches[uniform_below(rng, 4)];
    cfg.epochs = options.epochs;
    cfg.min_steps = options.min_steps;
    cfg.topology = Topology::PerStep;
    cfg.seed = derive_seed(seed, {static_cast<std::uint64_t>(t)});
    NoiseSchedule sched = schedule;
    if (options.tune_schedule) {
      const double eps = uniform01(rng);
      const int sweeps = kSweeps[uniform_below(rng, 5)];
      sched = NoiseSchedule::from_sweeps(schedule.q(), schedule.p(), sweeps, eps);
    }
    ConditionalModel model = train(fit, sched, cfg);
    const NoisedData val_noised(val, sched, derive_seed(seed, {0x76616cULL}));
    const double loss = validation_loss(model, val_noised);
    trials.push_back({cfg, sched, loss});
    if (!best_model || loss < trials[best].validation_loss) {
      best = trials.size() - 1;
      best_model = std::move(model);
    }
  }
  return SearchResult{trials[best].config, trials[best].schedule, std::move(*best_model), std::move(trials)};
}

}  // namespace ndiff
