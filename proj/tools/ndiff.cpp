// ndiff: data generation, training, sampling, evaluation and experiment driver.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ndiff/error.hpp"
#include "ndiff/experiment.hpp"
#include "ndiff/metrics.hpp"
#include "ndiff/neurise.hpp"
#include "ndiff/parallel.hpp"
#include "ndiff/reverse.hpp"
#include "ndiff/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ndiff;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 0;
  std::optional<int> guard_bits;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (g.guard_bits) c.guard_bits = *g.guard_bits;
  if (!g.out_dir.empty()) c.out_dir = g.out_dir;
  c.validate();
  return c;
}

fs::path prepare_out(const ExperimentConfig& c) {
  fs::path out(c.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void write_record(const fs::path& out, const std::string& command, const ExperimentConfig& c, json metrics,
                  double seconds, const std::string& checkpoint = {}) {
  json rec;
  rec["command"] = command;
  rec["config"] = c.to_ini();
  rec["seed"] = c.seed;
  rec["metrics"] = std::move(metrics);
  rec["wall_seconds"] = seconds;
  if (!checkpoint.empty()) rec["checkpoint"] = checkpoint;
  write_text(out / "run.json", rec.dump(2) + "\n");
  write_text(out / "config.ini", c.to_ini());
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

NoiseSchedule schedule_for(const ExperimentConfig& c, int q, int p) {
  return NoiseSchedule::from_sweeps(q, p, c.sweeps, c.epsilon);
}

TrainConfig train_config_for(const ExperimentConfig& c) {
  TrainConfig t = c.train;
  t.seed = derive_seed(c.seed, {0x747261696eULL, c.train.seed});
  return t;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Globals& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = resolve_config(g);
  const fs::path out = prepare_out(c);
  const GibbsModel model = build_model(c.model);
  const auto train = generate_data(model, c.data.n_train, c.data, derive_seed(c.seed, {0x747261696eULL}), c.guard_bits);
  const auto test = generate_data(model, c.data.n_test, c.data, derive_seed(c.seed, {0x74657374ULL}), c.guard_bits);
  write_model(out / "model.txt", model);
  write_samples(out / "train.txt", train);
  write_samples(out / "test.txt", test);
  write_record(out, "gen-data", c, {{"n_train", train.size()}, {"n_test", test.size()}, {"provenance", train.provenance()}},
               since(t0));
  std::cout << "wrote " << (out / "model.txt").string() << ", train.txt (" << train.size() << " rows), test.txt ("
            << test.size() << " rows)\n";
  return 0;
}

int cmd_train(const Globals& g, const std::string& data_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = resolve_config(g);
  const fs::path out = prepare_out(c);
  const SampleSet data = read_samples(fs::path(data_path.empty() ? (out / "train.txt").string() : data_path));
  const NoiseSchedule schedule = schedule_for(c, data.q(), data.p());
  const TrainConfig tc = train_config_for(c);
  TrainLog log;
  const ConditionalModel model = train(data, schedule, tc, &log);
  const fs::path ck = out / "checkpoint.bin";
  save_checkpoint(ck, model, CheckpointInfo{tc, data.fingerprint()});
  {
    std::ofstream f(out / "loss.csv");
    if (!f) throw IoError("cannot write loss.csv");
    f << "network,step,loss\n";
    f.precision(10);
    for (const auto& pt : log.curve) f << pt.network << ',' << pt.step << ',' << pt.loss << '\n';
  }
  const double final_loss = log.curve.empty() ? 1.0 : log.curve.back().loss;
  write_record(out, "train", c,
               {{"rows", data.size()}, {"steps", schedule.steps()}, {"params", model.param_count()},
                {"final_loss", final_loss}},
               since(t0), ck.string());
  std::cout << "trained " << model.networks().size() << " network(s), " << model.param_count() << " parameters -> "
            << ck.string() << "\n";
  return 0;
}

int cmd_sample(const Globals& g, const std::string& checkpoint, std::size_t n, const std::string& out_file) {
  const ExperimentConfig c = resolve_config(g);
  const fs::path ck = checkpoint.empty() ? fs::path(c.out_dir) / "checkpoint.bin" : fs::path(checkpoint);
  const ConditionalModel model = load_checkpoint(ck);
  ReverseDiagnostics diag;
  SampleSet s = reverse_sample(model, model.schedule(), n, UniformInit{}, c.seed, &diag);
  s.set_provenance("sampler=reverse checkpoint=" + hex(file_hash(ck)) + " seed=" + std::to_string(c.seed));
  const fs::path dest = out_file.empty() ? prepare_out(c) / "generated.txt" : fs::path(out_file);
  write_samples(dest, s);
  std::cout << "wrote " << s.size() << " samples to " << dest.string() << " (floored rows: " << diag.floored_rows
            << ")\n";
  return 0;
}

int cmd_eval(const Globals& g, const std::string& generated, const std::string& reference,
             const std::string& model_file, const std::vector<std::string>& metrics) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = resolve_config(g);
  const SampleSet gen = read_samples(fs::path(generated));
  std::optional<SampleSet> ref;
  std::optional<ExactDistribution> exact;
  if (!model_file.empty()) {
    const GibbsModel m = read_model(fs::path(model_file));
    if (within_guard(num_sites(m), alphabet_size(m), c.guard_bits)) exact = exact_distribution(m, c.guard_bits);
    else if (reference.empty())
      throw GuardError("model is beyond the enumeration guard; pass --reference samples instead");
  }
  if (!reference.empty()) ref = read_samples(fs::path(reference), gen.p());
  if (!exact && !ref) throw ConfigError("eval needs --reference or --model");

  json out = json::array();
  for (const std::string& m : metrics) {
    MetricReport r;
    if (m == "tv") {
      r = exact ? tv_report(gen, *exact) : tv_report(gen, *ref);
    } else if (m == "cross_correlation" || m == "cc") {
      if (ref) {
        r = cross_correlation_report(gen, *ref);
      } else {
        r.metric = "cross_correlation_error";
        r.value = cross_correlation_error(cross_correlation(gen), cross_correlation(*exact));
        r.n_a = gen.size();
        r.parameters["mode"] = "empirical-vs-exact";
      }
    } else if (m == "mmd") {
      if (!ref) throw ConfigError("mmd needs --reference samples");
      r = mmd(gen, *ref);
    } else {
      throw ConfigError("unknown metric '" + m + "' (tv, cross_correlation, mmd)");
    }
    out.push_back(json::parse(r.to_json()));
  }
  std::cout << out.dump(2) << "\n";
  if (!g.out_dir.empty()) write_record(prepare_out(c), "eval", c, out, since(t0));
  return 0;
}

int cmd_verify(const Globals& g, const std::vector<double>& magnitudes, int draws, const std::string& mode,
               const std::vector<std::size_t>& noise_sizes) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = resolve_config(g);
  const GibbsModel model = build_model(c.model);
  const int q = num_sites(model), p = alphabet_size(model);
  check_guard(q, p, c.guard_bits);
  const NoiseSchedule schedule = schedule_for(c, q, p);
  const auto mu0 = exact_distribution(model, c.guard_bits);
  json bounds = json::array();
  std::size_t failures = 0;
  for (double m : magnitudes)
    for (int d = 0; d < draws; ++d) {
      const Perturbation pert{m, derive_seed(c.seed, {static_cast<std::uint64_t>(d)}), parse_perturbation_mode(mode)};
      const BoundReport r = verify_error_bound(mu0, schedule, pert, c.guard_bits);
      failures += !r.holds;
      json j = json::parse(r.to_json());
      j["kind"] = "error-bound";
      j["magnitude"] = m;
      j["draw"] = d;
      bounds.push_back(j);
    }
  for (std::size_t n : noise_sizes) {
    const BoundReport r = verify_init_error(model, schedule, n, derive_seed(c.seed, {n}), c.guard_bits);
    failures += !r.holds;
    json j = json::parse(r.to_json());
    j["kind"] = "init-error";
    j["noise_samples"] = n;
    bounds.push_back(j);
  }
  json result{{"bounds", bounds}, {"failures", failures}};
  if (q * std::log2(p) <= 12.0) result["degenerate_demo"] = json::parse(degenerate_reverse_demo(model, schedule).to_json());
  std::cout << result.dump(2) << "\n";
  if (!g.out_dir.empty()) {
    const fs::path out = prepare_out(c);
    write_text(out / "verify.json", result.dump(2) + "\n");
    write_record(out, "verify", c, {{"failures", failures}, {"checks", bounds.size()}}, since(t0));
  }
  return 0;
}

int cmd_sweep(const Globals& g, const std::string& data_path, int budget, bool tune_schedule) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = resolve_config(g);
  const fs::path out = prepare_out(c);
  const SampleSet data = read_samples(fs::path(data_path.empty() ? (out / "train.txt").string() : data_path));
  SearchOptions opts;
  opts.tune_schedule = tune_schedule;
  opts.epochs = c.train.epochs;
  opts.min_steps = c.train.min_steps;
  const SearchResult res = random_search(data, schedule_for(c, data.q(), data.p()), budget, c.seed, opts);
  {
    std::ofstream f(out / "leaderboard.csv");
    if (!f) throw IoError("cannot write leaderboard.csv");
    f << "trial,depth,width,learning_rate,weight_decay,batch_size,epsilon,sweeps,validation_loss\n";
    f.precision(10);
    for (std::size_t k = 0; k < res.trials.size(); ++k) {
      const auto& t = res.trials[k];
      f << k << ',' << t.config.depth << ',' << t.config.width << ',' << t.config.learning_rate << ','
        << t.config.weight_decay << ',' << t.config.batch_size << ',' << t.schedule.epsilon() << ','
        << t.schedule.steps() / t.schedule.q() << ',' << t.validation_loss << '\n';
    }
  }
  ExperimentConfig best = c;
  best.train = res.best_config;
  best.train.seed = c.train.seed;
  best.epsilon = res.best_schedule.epsilon();
  best.sweeps = res.best_schedule.steps() / res.best_schedule.q();
  write_text(out / "best.ini", best.to_ini());
  save_checkpoint(out / "checkpoint.bin", res.best_model, CheckpointInfo{res.best_config, data.fingerprint()});
  double best_loss = res.trials.front().validation_loss;
  for (const auto& t : res.trials) best_loss = std::min(best_loss, t.validation_loss);
  write_record(out, "sweep", c, {{"budget", budget}, {"best_validation_loss", best_loss}}, since(t0),
               (out / "checkpoint.bin").string());
  std::cout << "best validation loss " << best_loss << "; config in " << (out / "best.ini").string() << "\n";
  return 0;
}

int cmd_experiment(const Globals& g, const std::string& name) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = resolve_config(g);
  const fs::path out = prepare_out(c);
  const auto rows = run_experiment(name, c, [](const std::string& line) { std::cerr << line << "\n"; });
  const auto summary = summarize(rows);
  {
    std::ofstream f(out / (name + ".csv"));
    if (!f) throw IoError("cannot write results");
    write_results_csv(f, rows);
  }
  {
    std::ofstream f(out / (name + "_summary.csv"));
    if (!f) throw IoError("cannot write summary");
    write_summary_csv(f, summary);
  }
  write_summary_csv(std::cout, summary);
  write_record(out, "experiment " + name, c, {{"rows", rows.size()}}, since(t0));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete diffusion with learned single-site conditionals"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Base seed (overrides run.seed)");
  app.add_option("--out", g.out_dir, "Output directory (overrides run.out)");
  app.add_option("--threads", g.threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--guard-bits", g.guard_bits, "Largest q*log2(p) enumerated exactly")->check(CLI::Range(1, 62));

  auto* gen = app.add_subcommand("gen-data", "Write a model file and train/test sample files");

  auto* tr = app.add_subcommand("train", "Train the conditional networks and write a checkpoint");
  std::string data_path;
  tr->add_option("--data", data_path, "Training samples (default <out>/train.txt)");

  auto* sm = app.add_subcommand("sample", "Reverse-sample from a checkpoint");
  std::string checkpoint, sample_out;
  std::size_t n_samples = 10000;
  sm->add_option("--checkpoint", checkpoint, "Checkpoint (default <out>/checkpoint.bin)");
  sm->add_option("-n,--count", n_samples, "Number of samples")->check(CLI::PositiveNumber);
  sm->add_option("--output", sample_out, "Sample file (default <out>/generated.txt)");

  auto* ev = app.add_subcommand("eval", "Compare generated samples with a reference");
  std::string generated, reference, model_file;
  std::vector<std::string> metrics = {"tv", "cross_correlation"};
  ev->add_option("--generated", generated, "Generated samples")->required();
  ev->add_option("--reference", reference, "Reference samples");
  ev->add_option("--model", model_file, "Reference model file (exact mode within the guard)");
  ev->add_option("--metrics", metrics, "tv, cross_correlation, mmd")->delimiter(',');

  auto* vf = app.add_subcommand("verify", "Check the reverse-chain TV bounds by enumeration");
  std::vector<double> magnitudes = {0.0, 0.01, 0.05, 0.1};
  int draws = 5;
  std::string mode = "mix-with-uniform";
  std::vector<std::size_t> noise_sizes = {100, 1000, 10000};
  vf->add_option("--magnitudes", magnitudes, "Perturbation magnitudes")->delimiter(',');
  vf->add_option("--draws", draws, "Perturbation draws per magnitude")->check(CLI::PositiveNumber);
  vf->add_option("--mode", mode, "mix-with-uniform or random-simplex-jitter");
  vf->add_option("--noise-samples", noise_sizes, "Empirical-uniform initialization sizes")->delimiter(',');

  auto* sw = app.add_subcommand("sweep", "Random hyperparameter search");
  std::string sweep_data;
  int budget = 8;
  bool tune_schedule = false;
  sw->add_option("--data", sweep_data, "Training samples (default <out>/train.txt)");
  sw->add_option("--budget", budget, "Number of trials")->check(CLI::PositiveNumber);
  sw->add_flag("--tune-schedule", tune_schedule, "Also sample epsilon and the sweep count");

  auto* ex = app.add_subcommand("experiment", "Run a named pipeline");
  std::string name;
  ex->add_option("name", name, "ea-trend, potts-trend, harsh-vs-soft, local-vs-global")
      ->required()
      ->check(CLI::IsMember(kExperimentNames));

  for (auto* sub : {gen, tr, sm, ev, vf, sw, ex}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (g.threads > 0) omp_set_num_threads(g.threads);
  try {
    if (*gen) return cmd_gen_data(g);
    if (*tr) return cmd_train(g, data_path);
    if (*sm) return cmd_sample(g, checkpoint, n_samples, sample_out);
    if (*ev) return cmd_eval(g, generated, reference, model_file, metrics);
    if (*vf) return cmd_verify(g, magnitudes, draws, mode, noise_sizes);
    if (*sw) return cmd_sweep(g, sweep_data, budget, tune_schedule);
    if (*ex) return cmd_experiment(g, name);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const GuardError& e) {
    std::cerr << "guard error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
