#include "ndiff/experiment.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "ndiff/error.hpp"
#include "ndiff/metrics.hpp"
#include "ndiff/reverse.hpp"

namespace ndiff {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"model", {"type", "L", "p", "J", "h", "seed", "path"}},
    {"schedule", {"epsilon", "sweeps"}},
    {"train",
     {"depth", "width", "learning_rate", "weight_decay", "batch_size", "epochs", "min_steps", "topology",
      "all_coordinates", "cosine_decay", "seed"}},
    {"data", {"n_train", "n_test", "sampler", "burn_in", "thinning"}},
    {"experiment", {"trials", "models", "n_train_grid", "n_generate"}},
    {"run", {"seed", "guard_bits", "out"}},
};

template <class T>
void read_key(const pt::ptree& tree, const std::string& key, T& value) {
  auto node = tree.get_optional<std::string>(key);
  if (!node) return;
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      value = *node;
    } else if constexpr (std::is_same_v<T, bool>) {
      const std::string& s = *node;
      if (s == "true" || s == "1" || s == "yes") value = true;
      else if (s == "false" || s == "0" || s == "no") value = false;
      else throw std::invalid_argument(s);
    } else if constexpr (std::is_floating_point_v<T>) {
      std::size_t used = 0;
      value = std::stod(*node, &used);
      if (used != node->size()) throw std::invalid_argument(*node);
    } else {
      std::size_t used = 0;
      const long long v = std::stoll(*node, &used);
      if (used != node->size() || (std::is_unsigned_v<T> && v < 0)) throw std::invalid_argument(*node);
      value = static_cast<T>(v);
    }
  } catch (const std::exception&) {
    throw ConfigError("config: bad value for '" + key + "': '" + *node + "'");
  }
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      // Accept 1e3-style entries as well as integers.
      const double v = std::stod(item, &used);
      if (used != item.size() || !(v >= 1.0) || v > 1e12) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(std::llround(v)));
    } catch (const std::exception&) {
      throw ConfigError("bad size list entry '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty size list");
  return out;
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    auto known = kKnownKeys.find(section);
    if (known == kKnownKeys.end() || body.data().size() > 0) throw ConfigError("config: unknown section '" + section + "'");
    for (const auto& [key, _] : body)
      if (!known->second.count(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
  }

  ExperimentConfig c;
  read_key(tree, "model.type", c.model.type);
  read_key(tree, "model.L", c.model.L);
  read_key(tree, "model.p", c.model.p);
  read_key(tree, "model.J", c.model.J);
  read_key(tree, "model.h", c.model.h);
  read_key(tree, "model.seed", c.model.seed);
  read_key(tree, "model.path", c.model.path);
  read_key(tree, "schedule.epsilon", c.epsilon);
  read_key(tree, "schedule.sweeps", c.sweeps);
  read_key(tree, "train.depth", c.train.depth);
  read_key(tree, "train.width", c.train.width);
  read_key(tree, "train.learning_rate", c.train.learning_rate);
  read_key(tree, "train.weight_decay", c.train.weight_decay);
  read_key(tree, "train.batch_size", c.train.batch_size);
  read_key(tree, "train.epochs", c.train.epochs);
  read_key(tree, "train.min_steps", c.train.min_steps);
  read_key(tree, "train.all_coordinates", c.train.all_coordinates);
  read_key(tree, "train.cosine_decay", c.train.cosine_decay);
  read_key(tree, "train.seed", c.train.seed);
  std::string topology = to_string(c.train.topology);
  read_key(tree, "train.topology", topology);
  c.train.topology = parse_topology(topology);
  read_key(tree, "data.n_train", c.data.n_train);
  read_key(tree, "data.n_test", c.data.n_test);
  read_key(tree, "data.sampler", c.data.sampler);
  read_key(tree, "data.burn_in", c.data.burn_in);
  read_key(tree, "data.thinning", c.data.thinning);
  read_key(tree, "experiment.trials", c.experiment.trials);
  read_key(tree, "experiment.models", c.experiment.models);
  read_key(tree, "experiment.n_generate", c.experiment.n_generate);
  if (auto grid = tree.get_optional<std::string>("experiment.n_train_grid"))
    c.experiment.n_train_grid = parse_size_list(*grid);
  read_key(tree, "run.seed", c.seed);
  read_key(tree, "run.guard_bits", c.guard_bits);
  read_key(tree, "run.out", c.out_dir);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  return parse(in);
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  static const std::set<std::string> types = {"ea-ising", "ea-potts", "model-file", "samples-file"};
  if (!types.count(model.type)) fail("model.type must be one of ea-ising, ea-potts, model-file, samples-file");
  if (model.L < 2) fail("model.L must be >= 2");
  if (model.p < 2) fail("model.p must be >= 2");
  if ((model.type == "model-file" || model.type == "samples-file")) {
    if (model.path.empty()) fail("model.path is required for file models");
    if (!std::filesystem::exists(model.path)) fail("model.path '" + model.path + "' does not exist");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("schedule.epsilon must be in [0, 1]");
  if (sweeps < 0) fail("schedule.sweeps must be >= 0");
  train.validate();
  if (data.n_train == 0 || data.n_test == 0) fail("data sizes must be positive");
  if (data.sampler != "auto" && data.sampler != "exact" && data.sampler != "glauber")
    fail("data.sampler must be auto, exact or glauber");
  if (data.burn_in < 0 || data.thinning < 1) fail("data.burn_in >= 0 and data.thinning >= 1 required");
  if (experiment.trials < 1 || experiment.models < 1) fail("experiment.trials and experiment.models must be >= 1");
  if (experiment.n_generate < 2) fail("experiment.n_generate must be >= 2");
  if (guard_bits < 1 || guard_bits > 62) fail("run.guard_bits must be in 1..62");
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream os;
  os << "[model]\ntype = " << model.type << "\nL = " << model.L << "\np = " << model.p << "\nJ = " << fmt(model.J)
     << "\nh = " << fmt(model.h) << "\nseed = " << model.seed << "\n";
  if (!model.path.empty()) os << "path = " << model.path << "\n";
  os << "\n[schedule]\nepsilon = " << fmt(epsilon) << "\nsweeps = " << sweeps << "\n";
  os << "\n[train]\ndepth = " << train.depth << "\nwidth = " << train.width
     << "\nlearning_rate = " << fmt(train.learning_rate) << "\nweight_decay = " << fmt(train.weight_decay)
     << "\nbatch_size = " << train.batch_size << "\nepochs = " << train.epochs << "\nmin_steps = " << train.min_steps
     << "\ntopology = " << to_string(train.topology) << "\nall_coordinates = " << (train.all_coordinates ? "true" : "false")
     << "\ncosine_decay = " << (train.cosine_decay ? "true" : "false")
     << "\nseed = " << train.seed << "\n";
  os << "\n[data]\nn_train = " << data.n_train << "\nn_test = " << data.n_test << "\nsampler = " << data.sampler
     << "\nburn_in = " << data.burn_in << "\nthinning = " << data.thinning << "\n";
  os << "\n[experiment]\ntrials = " << experiment.trials << "\nmodels = " << experiment.models
     << "\nn_train_grid = " << join_sizes(experiment.n_train_grid) << "\nn_generate = " << experiment.n_generate << "\n";
  os << "\n[run]\nseed = " << seed << "\nguard_bits = " << guard_bits << "\nout = " << out_dir << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------

GibbsModel build_model(const ModelSpec& spec, int model_index) {
  const std::uint64_t seed =
      model_index == 0 ? spec.seed : derive_seed(spec.seed, {static_cast<std::uint64_t>(model_index)});
  if (spec.type == "ea-ising") return ea_ising(EAParams{spec.L, spec.J, spec.h, seed});
  if (spec.type == "ea-potts") return ea_potts(spec.L, spec.p, spec.J, spec.h, seed);
  if (spec.type == "model-file") return read_model(std::filesystem::path(spec.path));
  throw ConfigError("model type '" + spec.type + "' has no Gibbs model");
}

SampleSet generate_data(const GibbsModel& model, std::size_t n, const DataSpec& data, std::uint64_t seed,
                        int guard_bits) {
  const int q = num_sites(model);
  const int p = alphabet_size(model);
  const bool enumerable = within_guard(q, p, guard_bits);
  if (data.sampler == "exact" || (data.sampler == "auto" && enumerable)) {
    check_guard(q, p, guard_bits);
    return sample_exact(exact_distribution(model, guard_bits), n, seed);
  }
  return sample_glauber(model, n, data.burn_in, data.thinning, seed);
}

// ---------------------------------------------------------------------------

std::vector<ResultRow> run_trial(const TrialSetup& setup, const SampleSet& train_data,
                                 const ExactDistribution* reference, const SampleSet* test, std::size_t n_generate) {
  if (reference == nullptr && test == nullptr) throw std::invalid_argument("run_trial: no reference");
  const auto start = std::chrono::steady_clock::now();
  TrainConfig cfg = setup.train;
  cfg.seed = derive_seed(setup.seed, {2});
  const ConditionalModel model = train(train_data, setup.schedule, cfg);
  const SampleSet generated =
      reverse_sample(model, setup.schedule, n_generate, UniformInit{}, derive_seed(setup.seed, {3}));

  std::vector<std::pair<std::string, double>> values;
  if (reference != nullptr) {
    values.emplace_back("tv", tv(*reference, empirical_from_samples(generated)));
    values.emplace_back("cross_correlation_error",
                        cross_correlation_error(cross_correlation(generated), cross_correlation(*reference)));
  } else {
    values.emplace_back("tv", tv(empirical_from_samples(generated), empirical_from_samples(*test)));
    values.emplace_back("cross_correlation_error", cross_correlation_error(generated, *test));
    values.emplace_back("mmd", mmd(generated, *test).value);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::vector<ResultRow> rows;
  for (const auto& [metric, value] : values)
    rows.push_back({setup.variant, setup.model_index, setup.trial, setup.n_train, metric, value, setup.seed, wall});
  return rows;
}

namespace {

struct Variant {
  std::string name;
  NoiseSchedule schedule;
  TrainConfig train;
};

std::vector<Variant> variants_for(const std::string& name, const ExperimentConfig& c, int q, int p) {
  const auto base = NoiseSchedule::from_sweeps(q, p, c.sweeps, c.epsilon);
  if (name == "ea-trend" || name == "potts-trend") return {{name, base, c.train}};
  if (name == "harsh-vs-soft")
    return {{"harsh", NoiseSchedule::from_sweeps(q, p, 1, 0.0), c.train},
            {"soft", NoiseSchedule::from_sweeps(q, p, 2, 0.5), c.train}};
  if (name == "local-vs-global") {
    TrainConfig local = c.train, global = c.train;
    local.topology = Topology::PerStep;
    global.topology = Topology::Global;
    return {{"per-step", base, local}, {"global", base, global}};
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

}  // namespace

std::vector<ResultRow> run_experiment(const std::string& name, const ExperimentConfig& config,
                                      const ProgressFn& progress) {
  if (std::find(kExperimentNames.begin(), kExperimentNames.end(), name) == kExperimentNames.end())
    throw ConfigError("unknown experiment '" + name + "'");
  ModelSpec spec = config.model;
  if (name == "ea-trend" && spec.type == "ea-potts") spec.type = "ea-ising";
  if (name == "potts-trend" && spec.type == "ea-ising") spec.type = "ea-potts";

  std::vector<ResultRow> rows;
  for (int m = 0; m < config.experiment.models; ++m) {
    std::optional<GibbsModel> model;
    std::optional<ExactDistribution> exact;
    std::optional<SampleSet> pool, test;
    int q = 0, p = 0;
    if (spec.type == "samples-file") {
      SampleSet all = read_samples(std::filesystem::path(spec.path));
      if (all.size() < 4) throw ConfigError("samples file needs at least four rows");
      q = all.q();
      p = all.p();
      // Shuffled split: the first rows form the reference, the rest the training pool.
      std::vector<std::size_t> idx(all.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(m), 0x73706c6974ULL}));
      std::shuffle(idx.begin(), idx.end(), rng);
      const std::size_t n_test = std::min(config.data.n_test, all.size() / 2);
      test.emplace(q, p, all.provenance());
      pool.emplace(q, p, all.provenance());
      for (std::size_t k = 0; k < idx.size(); ++k) (k < n_test ? *test : *pool).add(all.row(idx[k]));
    } else {
      model = build_model(spec, m);
      q = num_sites(*model);
      p = alphabet_size(*model);
      if (within_guard(q, p, config.guard_bits)) {
        exact = exact_distribution(*model, config.guard_bits);
      } else {
        test = generate_data(*model, config.data.n_test, config.data,
                             derive_seed(config.seed, {static_cast<std::uint64_t>(m), 0x74657374ULL}),
                             config.guard_bits);
      }
    }

    const auto variants = variants_for(name, config, q, p);
    for (int t = 0; t < config.experiment.trials; ++t) {
      const std::uint64_t trial_seed =
          derive_seed(config.seed, {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(t)});
      for (std::size_t n_train : config.experiment.n_train_grid) {
        SampleSet data(q, p);
        if (pool) {
          if (n_train > pool->size()) throw ConfigError("train size exceeds the samples file");
          std::vector<std::size_t> idx(pool->size());
          std::iota(idx.begin(), idx.end(), std::size_t{0});
          Rng rng(derive_seed(trial_seed, {1, n_train}));
          std::shuffle(idx.begin(), idx.end(), rng);
          for (std::size_t k = 0; k < n_train; ++k) data.add(pool->row(idx[k]));
        } else {
          data = generate_data(*model, n_train, config.data, derive_seed(trial_seed, {1, n_train}), config.guard_bits);
        }
        for (const Variant& v : variants) {
          TrialSetup setup{v.name, m, t, n_train, v.schedule, v.train, derive_seed(trial_seed, {n_train})};
          auto r = run_trial(setup, data, exact ? &*exact : nullptr, test ? &*test : nullptr,
                             config.experiment.n_generate);
          if (progress) {
            std::ostringstream os;
            os << name << " model=" << m << " trial=" << t << " variant=" << v.name << " N=" << n_train;
            for (const auto& row : r) os << " " << row.metric << "=" << row.value;
            os << " (" << r.front().wall_seconds << " s)";
            progress(os.str());
          }
          rows.insert(rows.end(), r.begin(), r.end());
        }
      }
    }
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::map<std::tuple<std::string, std::size_t, std::string>, std::vector<double>> groups;
  std::vector<std::tuple<std::string, std::size_t, std::string>> order;
  for (const auto& r : rows) {
    auto key = std::make_tuple(r.variant, r.n_train, r.metric);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.value);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& v = groups[key];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), median(v), sd, v.size()});
  }
  return out;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "variant,model,trial,N_train,metric,value,seed,wall_seconds\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.variant << ',' << r.model_index << ',' << r.trial << ',' << r.n_train << ',' << r.metric << ','
        << r.value << ',' << r.seed << ',' << r.wall_seconds << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "variant,N_train,metric,median,std,count\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.variant << ',' << r.n_train << ',' << r.metric << ',' << r.median << ',' << r.stddev << ',' << r.count
        << '\n';
}

}  // namespace ndiff
