#include "ndiff/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "ndiff/error.hpp"
#include "ndiff/kernels.hpp"
#include "ndiff/rng.hpp"

namespace ndiff {

namespace {

std::vector<Edge> normalize_edges(int q, std::vector<Edge> edges) {
  std::map<std::pair<int, int>, double> merged;
  for (Edge e : edges) {
    if (e.i > e.j) std::swap(e.i, e.j);
    if (e.i < 1 || e.j > q || e.i == e.j)
      throw std::invalid_argument("edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ") invalid for q=" +
                                  std::to_string(q));
    if (!std::isfinite(e.coupling)) throw std::invalid_argument("non-finite coupling");
    merged[{e.i, e.j}] += e.coupling;
  }
  std::vector<Edge> out;
  out.reserve(merged.size());
  for (const auto& [key, c] : merged) out.push_back({key.first, key.second, c});
  return out;
}

std::vector<std::vector<Neighbor>> build_adjacency(int q, const std::vector<Edge>& edges) {
  std::vector<std::vector<Neighbor>> adj(static_cast<std::size_t>(q));
  for (const Edge& e : edges) {
    adj[e.i - 1].push_back({e.j, e.coupling});
    adj[e.j - 1].push_back({e.i, e.coupling});
  }
  return adj;
}

// Right and bottom neighbours on an L x L torus, row-major site numbering.
std::vector<std::pair<int, int>> periodic_lattice_slots(int L) {
  if (L < 2) throw std::invalid_argument("lattice side L must be >= 2");
  std::vector<std::pair<int, int>> slots;
  for (int r = 0; r < L; ++r)
    for (int c = 0; c < L; ++c) {
      const int site = r * L + c + 1;
      slots.emplace_back(site, r * L + (c + 1) % L + 1);
      slots.emplace_back(site, ((r + 1) % L) * L + c + 1);
    }
  return slots;
}

inline double spin(Symbol s) { return 2.0 * s - 1.0; }

}  // namespace

IsingModel::IsingModel(int q, std::vector<Edge> edges, std::vector<double> fields)
    : q_(q), edges_(normalize_edges(q, std::move(edges))), fields_(std::move(fields)) {
  if (q < 1) throw std::invalid_argument("IsingModel: q must be >= 1");
  if (static_cast<int>(fields_.size()) != q) throw std::invalid_argument("IsingModel: fields must have length q");
  adjacency_ = build_adjacency(q_, edges_);
}

std::span<const Neighbor> IsingModel::neighbors(int u) const { return adjacency_.at(static_cast<std::size_t>(u - 1)); }

PottsModel::PottsModel(int q, int p, std::vector<Edge> edges, std::vector<double> fields)
    : q_(q), p_(p), edges_(normalize_edges(q, std::move(edges))), fields_(std::move(fields)) {
  check_alphabet(p);
  if (q < 1) throw std::invalid_argument("PottsModel: q must be >= 1");
  if (fields_.size() != static_cast<std::size_t>(q) * static_cast<std::size_t>(p))
    throw std::invalid_argument("PottsModel: fields must be q x p");
  adjacency_ = build_adjacency(q_, edges_);
}

std::span<const Neighbor> PottsModel::neighbors(int u) const { return adjacency_.at(static_cast<std::size_t>(u - 1)); }

int num_sites(const GibbsModel& model) {
  return std::visit([](const auto& m) { return m.q(); }, model);
}

int alphabet_size(const GibbsModel& model) {
  return std::visit([](const auto& m) { return m.p(); }, model);
}

IsingModel ea_ising(const EAParams& params) {
  if (params.J_mag < 0 || params.h_mag < 0) throw std::invalid_argument("ea_ising: magnitudes must be >= 0");
  Rng rng(params.seed);
  std::vector<Edge> edges;
  for (auto [i, j] : periodic_lattice_slots(params.L))
    edges.push_back({i, j, coin(rng) ? params.J_mag : -params.J_mag});
  const int q = params.L * params.L;
  std::vector<double> h(static_cast<std::size_t>(q));
  for (double& v : h) v = coin(rng) ? params.h_mag : -params.h_mag;
  return IsingModel(q, std::move(edges), std::move(h));
}

PottsModel ea_potts(int L, int p, double J, double h, std::uint64_t seed) {
  check_alphabet(p);
  Rng rng(seed);
  std::vector<Edge> edges;
  for (auto [i, j] : periodic_lattice_slots(L)) edges.push_back({i, j, coin(rng) ? J : -J});
  const int q = L * L;
  std::vector<double> fields(static_cast<std::size_t>(q * p));
  for (double& v : fields) v = coin(rng) ? h : -h;
  return PottsModel(q, p, std::move(edges), std::move(fields));
}

IsingModel random_ising(int q, double coupling_scale, double field_scale, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (int i = 1; i <= q; ++i)
    for (int j = i + 1; j <= q; ++j) edges.push_back({i, j, coupling_scale * (2.0 * uniform01(rng) - 1.0)});
  std::vector<double> h(static_cast<std::size_t>(q));
  for (double& v : h) v = field_scale * (2.0 * uniform01(rng) - 1.0);
  return IsingModel(q, std::move(edges), std::move(h));
}

PottsModel random_potts(int q, int p, double coupling_scale, double field_scale, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (int i = 1; i <= q; ++i)
    for (int j = i + 1; j <= q; ++j) edges.push_back({i, j, coupling_scale * (2.0 * uniform01(rng) - 1.0)});
  std::vector<double> fields(static_cast<std::size_t>(q * p));
  for (double& v : fields) v = field_scale * (2.0 * uniform01(rng) - 1.0);
  return PottsModel(q, p, std::move(edges), std::move(fields));
}

double energy(const IsingModel& model, std::span<const Symbol> config) {
  check_config(config, model.q(), 2);
  double H = 0.0;
  for (const Edge& e : model.edges()) H += e.coupling * spin(config[e.i - 1]) * spin(config[e.j - 1]);
  for (int i = 0; i < model.q(); ++i) H += model.fields()[i] * spin(config[i]);
  return H;
}

double energy(const PottsModel& model, std::span<const Symbol> config) {
  check_config(config, model.q(), model.p());
  double H = 0.0;
  for (const Edge& e : model.edges())
    if (config[e.i - 1] == config[e.j - 1]) H -= e.coupling;
  for (int i = 1; i <= model.q(); ++i) H -= model.field(i, config[i - 1]);
  return H;
}

double energy(const GibbsModel& model, std::span<const Symbol> config) {
  return std::visit([&](const auto& m) { return energy(m, config); }, model);
}

ExactDistribution exact_distribution(const GibbsModel& model, int guard_bits) {
  const int q = num_sites(model);
  const int p = alphabet_size(model);
  check_guard(q, p, guard_bits);
  const std::vector<double> log_w = kernels::gibbs_log_weights(model);
  return ExactDistribution::from_log_weights(q, p, log_w);
}

void exact_conditional(const GibbsModel& model, std::span<const Symbol> config, int u, std::span<double> out) {
  const int q = num_sites(model);
  const int p = alphabet_size(model);
  if (u < 1 || u > q) throw std::out_of_range("exact_conditional: site " + std::to_string(u) + " out of range");
  if (static_cast<int>(config.size()) != q || static_cast<int>(out.size()) != p)
    throw std::invalid_argument("exact_conditional: dimension mismatch");

  if (const auto* ising = std::get_if<IsingModel>(&model)) {
    double local = ising->fields()[u - 1];
    for (const Neighbor& nb : ising->neighbors(u)) local += nb.coupling * spin(config[nb.site - 1]);
    // H_u(r) = s_r * local with s_0 = -1, s_1 = +1.
    const double z = 2.0 * local;
    const double p1 = 1.0 / (1.0 + std::exp(-z));
    out[0] = 1.0 - p1;
    out[1] = p1;
    return;
  }
  const auto& potts = std::get<PottsModel>(model);
  double max_e = -INFINITY;
  for (int r = 0; r < p; ++r) {
    double e = -potts.field(u, r);
    for (const Neighbor& nb : potts.neighbors(u))
      if (config[nb.site - 1] == r) e -= nb.coupling;
    out[r] = e;
    max_e = std::max(max_e, e);
  }
  double total = 0.0;
  for (int r = 0; r < p; ++r) total += (out[r] = std::exp(out[r] - max_e));
  for (int r = 0; r < p; ++r) out[r] /= total;
}

std::vector<double> exact_conditional(const GibbsModel& model, std::span<const Symbol> config, int u) {
  std::vector<double> out(static_cast<std::size_t>(alphabet_size(model)));
  exact_conditional(model, config, u, out);
  return out;
}

SampleSet sample_exact(const ExactDistribution& dist, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_exact: n must be positive");
  std::vector<double> cdf(dist.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = (acc += dist.probs()[i]);
  Rng rng(seed);
  SampleSet out(dist.q(), dist.p(), "sampler=exact seed=" + std::to_string(seed));
  out.reserve(n);
  Configuration row(static_cast<std::size_t>(dist.q()));
  for (std::size_t k = 0; k < n; ++k) {
    const double x = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    auto idx = static_cast<StateIndex>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    while (dist.probs()[idx] == 0.0 && idx > 0) --idx;  // never land on a zero-mass state
    decode_into(idx, dist.p(), row);
    out.add(row);
  }
  return out;
}

SampleSet sample_glauber(const GibbsModel& model, std::size_t n, int burn_in, int thinning, std::uint64_t seed) {
  if (burn_in < 1 || thinning < 1) throw std::invalid_argument("sample_glauber: burn_in and thinning must be >= 1");
  const int q = num_sites(model);
  const int p = alphabet_size(model);
  Rng rng(seed);
  Configuration state(static_cast<std::size_t>(q));
  for (auto& s : state) s = uniform_below(rng, p);
  std::vector<double> cond(static_cast<std::size_t>(p));
  auto sweep = [&] {
    for (int u = 1; u <= q; ++u) {
      exact_conditional(model, state, u, cond);
      state[u - 1] = sample_categorical(cond, rng);
    }
  };
  for (int s = 0; s < burn_in; ++s) sweep();
  SampleSet out(q, p,
                "sampler=glauber seed=" + std::to_string(seed) + " burn_in=" + std::to_string(burn_in) +
                    " thinning=" + std::to_string(thinning));
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (int s = 0; s < thinning; ++s) sweep();
    out.add(state);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

void write_model(std::ostream& out, const GibbsModel& model) {
  out << "ndiff-model 1\n";
  out << std::setprecision(17);
  if (const auto* ising = std::get_if<IsingModel>(&model)) {
    out << "type ising\nq " << ising->q() << "\np 2\n";
    for (const Edge& e : ising->edges()) out << "edge " << e.i << ' ' << e.j << ' ' << e.coupling << '\n';
    for (int i = 1; i <= ising->q(); ++i) out << "field " << i << ' ' << ising->fields()[i - 1] << '\n';
  } else {
    const auto& potts = std::get<PottsModel>(model);
    out << "type potts\nq " << potts.q() << "\np " << potts.p() << '\n';
    for (const Edge& e : potts.edges()) out << "edge " << e.i << ' ' << e.j << ' ' << e.coupling << '\n';
    for (int i = 1; i <= potts.q(); ++i)
      for (int s = 0; s < potts.p(); ++s) out << "field " << i << ' ' << s << ' ' << potts.field(i, s) << '\n';
  }
}

void write_model(const std::filesystem::path& path, const GibbsModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_model(out, model);
  if (!out) throw IoError("write failed: '" + path.string() + "'");
}

GibbsModel read_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ndiff-model 1", 0) != 0)
    throw IoError("not an ndiff model file (missing 'ndiff-model 1' tag)");
  std::string type;
  int q = 0, p = 0;
  std::vector<Edge> edges;
  std::vector<std::tuple<int, int, double>> fields;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    bool ok = true;
    if (key == "type") {
      ok = static_cast<bool>(ss >> type);
    } else if (key == "q") {
      ok = static_cast<bool>(ss >> q);
    } else if (key == "p") {
      ok = static_cast<bool>(ss >> p);
    } else if (key == "edge") {
      Edge e;
      ok = static_cast<bool>(ss >> e.i >> e.j >> e.coupling);
      edges.push_back(e);
    } else if (key == "field") {
      int i = 0, s = 0;
      double v = 0;
      if (type == "potts") {
        ok = static_cast<bool>(ss >> i >> s >> v);
      } else {
        ok = static_cast<bool>(ss >> i >> v);
      }
      fields.emplace_back(i, s, v);
    } else {
      throw IoError("model file line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!ok) throw IoError("model file line " + std::to_string(line_no) + ": malformed '" + line + "'");
  }
  if (q < 1) throw IoError("model file: missing q");
  try {
    if (type == "ising") {
      std::vector<double> h(static_cast<std::size_t>(q), 0.0);
      for (auto [i, s, v] : fields) h.at(static_cast<std::size_t>(i - 1)) = v;
      return IsingModel(q, std::move(edges), std::move(h));
    }
    if (type == "potts") {
      std::vector<double> h(static_cast<std::size_t>(q * p), 0.0);
      for (auto [i, s, v] : fields) {
        if (s < 0 || s >= p) throw std::out_of_range("field symbol");
        h.at(static_cast<std::size_t>((i - 1) * p + s)) = v;
      }
      return PottsModel(q, p, std::move(edges), std::move(h));
    }
  } catch (const std::logic_error& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
  throw IoError("model file: unknown type '" + type + "'");
}

GibbsModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_model(in);
}

}  // namespace ndiff
