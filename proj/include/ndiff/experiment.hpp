#pragma once

// Experiment configuration and the training-size trend pipelines driven by the CLI.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ndiff/core.hpp"
#include "ndiff/forward.hpp"
#include "ndiff/models.hpp"
#include "ndiff/neurise.hpp"

namespace ndiff {

struct ModelSpec {
  std::string type = "ea-ising";  // ea-ising | ea-potts | model-file | samples-file
  int L = 4;
  int p = 3;  // ea-potts only
  double J = 1.2;
  double h = 0.05;
  std::uint64_t seed = 1;
  std::string path;
};

struct DataSpec {
  std::size_t n_train = 1000;
  std::size_t n_test = 100000;
  std::string sampler = "auto";  // auto | exact | glauber
  int burn_in = 200;
  int thinning = 5;
};

struct ExperimentSpec {
  int trials = 3;
  int models = 1;
  std::vector<std::size_t> n_train_grid = {100, 316, 1000, 3162, 10000, 31623, 100000};
  std::size_t n_generate = 100000;
};

struct ExperimentConfig {
  static TrainConfig default_train() {
    TrainConfig t;
    t.epochs = 5;
    t.min_steps = 200;
    return t;
  }

  ModelSpec model;
  double epsilon = 0.1;
  int sweeps = 2;
  TrainConfig train = default_train();
  DataSpec data;
  ExperimentSpec experiment;
  std::uint64_t seed = 0;
  int guard_bits = kDefaultGuardBits;
  std::string out_dir = "runs";

  // Throws ConfigError on unknown keys, malformed values or out-of-range fields.
  static ExperimentConfig load(const std::filesystem::path& path);
  static ExperimentConfig parse(std::istream& in);
  void validate() const;
  // Resolved config in the same INI format.
  std::string to_ini() const;
};

std::vector<std::size_t> parse_size_list(const std::string& text);

// Builds the Gibbs model for the spec; index k > 0 selects an independent
// instance with seed derive_seed(seed, {k}).
GibbsModel build_model(const ModelSpec& spec, int model_index = 0);

// Exact sampler inside the guard (sampler auto or exact), Glauber otherwise.
// Throws GuardError when sampler = exact is requested beyond the guard.
SampleSet generate_data(const GibbsModel& model, std::size_t n, const DataSpec& data, std::uint64_t seed,
                        int guard_bits);

struct ResultRow {
  std::string variant;
  int model_index = 0;
  int trial = 0;
  std::size_t n_train = 0;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

struct SummaryRow {
  std::string variant;
  std::size_t n_train = 0;
  std::string metric;
  double median = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};

// One train -> sample -> evaluate pass. `reference` is the exact law when the
// model is enumerable; otherwise `test` rows serve as the reference.
struct TrialSetup {
  std::string variant;
  int model_index = 0;
  int trial = 0;
  std::size_t n_train = 0;
  NoiseSchedule schedule;
  TrainConfig train;
  std::uint64_t seed = 0;
};

std::vector<ResultRow> run_trial(const TrialSetup& setup, const SampleSet& train_data,
                                 const ExactDistribution* reference, const SampleSet* test, std::size_t n_generate);

inline const std::vector<std::string> kExperimentNames = {"ea-trend", "potts-trend", "harsh-vs-soft",
                                                          "local-vs-global"};

using ProgressFn = std::function<void(const std::string&)>;

// Runs a named pipeline over the train-size grid with repeated trials.
std::vector<ResultRow> run_experiment(const std::string& name, const ExperimentConfig& config,
                                      const ProgressFn& progress = {});

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

double median(std::vector<double> values);

}  // namespace ndiff
