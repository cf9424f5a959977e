#pragma once

// Neural interaction screening for the time-indexed single-site conditionals.
//
// A network NN(n, u, sigma_{-u}) in R^p gives the partial energy
//   H_u(r) = <Phi(r), NN>,  Phi_s(r) = 1{r = s} - 1/p,
// and the conditional mu_n(r | sigma_{-u}) = softmax_r H_u(r). Training
// minimizes the screening loss mean exp(-H_u(sigma_u)) over forward-noised
// data.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ndiff/core.hpp"
#include "ndiff/forward.hpp"
#include "ndiff/mlp.hpp"
#include "ndiff/reverse.hpp"

namespace ndiff {

std::vector<double> phi(int r, int p);

// Context width: q-1 signed spins for p = 2, (q-1) * p centered blocks otherwise.
int context_dim(int q, int p);
// 1 (time n/T) + q (one-hot site) + context.
int input_dim(int q, int p);

// config[u-1] is skipped; out must have input_dim(q, p) entries.
void encode_input(int n, int u, std::span<const Symbol> config, const NoiseSchedule& schedule, std::span<double> out);
std::vector<double> encode_input(int n, int u, std::span<const Symbol> config, const NoiseSchedule& schedule);

enum class Topology { Global, PerStep };

std::string to_string(Topology t);
Topology parse_topology(const std::string& s);

struct TrainConfig {
  int depth = 1;
  int width = 64;
  double learning_rate = 1e-2;
  double weight_decay = 1e-6;
  int batch_size = 128;
  int epochs = 10;
  // Lower bound on optimizer steps per network, so tiny datasets still train.
  int min_steps = 0;
  std::uint64_t seed = 0;
  Topology topology = Topology::PerStep;
  // Train every site at every step instead of only the site the reverse
  // kernel queries.
  bool all_coordinates = false;
  // Cosine decay of the learning rate to zero over each network's steps.
  bool cosine_decay = true;

  // Throws ConfigError when a field is outside its declared range.
  void validate() const;
};

class ConditionalModel final : public ConditionalOracle {
 public:
  ConditionalModel(NoiseSchedule schedule, Topology topology, std::vector<Mlp> networks);

  static ConditionalModel initialized(const NoiseSchedule& schedule, const TrainConfig& config, Rng& rng);

  int q() const override { return schedule_.q(); }
  int p() const override { return schedule_.p(); }
  int steps() const override { return schedule_.steps(); }

  const NoiseSchedule& schedule() const { return schedule_; }
  Topology topology() const { return topology_; }
  std::vector<Mlp>& networks() { return networks_; }
  const std::vector<Mlp>& networks() const { return networks_; }
  std::size_t network_index(int n) const;
  std::size_t param_count() const;

  // Raw network output NN(n, u, sigma_{-u}) (length p).
  void energies(int n, int u, std::span<const Symbol> config, std::span<double> out) const;

  using ConditionalOracle::conditional;
  // Softmax of <Phi(r), NN>; throws std::runtime_error on non-finite output.
  void conditional(int n, int u, std::span<const Symbol> config, std::span<double> out) const override;

 private:
  NoiseSchedule schedule_;
  Topology topology_;
  std::vector<Mlp> networks_;
};

struct LossSample {
  int step = 0;
  int site = 0;  // 1-based
  Configuration config;
};

double neurise_loss(const ConditionalModel& model, std::span<const LossSample> batch);
// neurise_loss + weight_decay / 2 * |theta|^2, whose gradient loss_gradient returns.
double regularized_loss(const ConditionalModel& model, std::span<const LossSample> batch, double weight_decay);

// One flat gradient per network, congruent with networks()[k].params().
struct ModelGradient {
  std::vector<std::vector<double>> networks;
};

ModelGradient loss_gradient(const ConditionalModel& model, std::span<const LossSample> batch, double weight_decay);

struct LossPoint {
  std::size_t network = 0;
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainLog {
  std::vector<LossPoint> curve;
};

// Forward-noised copies of a dataset: the state of every row at every step
// 0..T, reconstructed from the per-step redraws.
class NoisedData {
 public:
  NoisedData(const SampleSet& data, const NoiseSchedule& schedule, std::uint64_t seed);

  std::size_t rows() const { return data_.size(); }
  const NoiseSchedule& schedule() const { return schedule_; }
  // State of `row` after n forward kernels (X_n).
  void state_at(std::size_t row, int n, std::span<Symbol> out) const;

 private:
  SampleSet data_;
  NoiseSchedule schedule_;
  std::vector<Symbol> after_;  // rows x T: site value right after kernel k
};

ConditionalModel train(const SampleSet& samples, const NoiseSchedule& schedule, const TrainConfig& config,
                       TrainLog* log = nullptr);

// Mean screening loss over every row of `data` at every step n with site u(n).
double validation_loss(const ConditionalModel& model, const NoisedData& data);

struct SearchOptions {
  bool tune_schedule = false;   // also sample epsilon and the sweep count
  int epochs = 10;
  int min_steps = 0;
  double validation_fraction = 0.2;
  // Caps on the sampled architecture, for quick searches.
  int max_depth = 5;
  int max_width = 512;
};

struct SearchTrial {
  TrainConfig config;
  NoiseSchedule schedule;
  double validation_loss = 0.0;
};

struct SearchResult {
  TrainConfig best_config;
  NoiseSchedule best_schedule;
  ConditionalModel best_model;
  std::vector<SearchTrial> trials;
};

SearchResult random_search(const SampleSet& samples, const NoiseSchedule& schedule, int budget, std::uint64_t seed,
                           const SearchOptions& options = {});

// Checkpoints: little-endian binary container, tag "NDIFFCK1".
struct CheckpointInfo {
  TrainConfig config;
  std::uint64_t data_fingerprint = 0;
};

void save_checkpoint(std::ostream& out, const ConditionalModel& model, const CheckpointInfo& info);
void save_checkpoint(const std::filesystem::path& path, const ConditionalModel& model, const CheckpointInfo& info);
ConditionalModel load_checkpoint(std::istream& in, CheckpointInfo* info = nullptr);
ConditionalModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace ndiff
