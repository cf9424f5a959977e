#include "ndiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "ndiff/kernels.hpp"

namespace ndiff {

namespace {

void check_same_space(int qa, int pa, int qb, int pb) {
  if (qa != qb || pa != pb) throw std::invalid_argument("tv: state spaces differ");
}

double tv_exact_empirical(const ExactDistribution& a, const EmpiricalDistribution& b) {
  check_same_space(a.q(), a.p(), b.q, b.p);
  // Terms off the empirical support contribute a(x); add those via the total.
  double acc = 0.0;
  double covered = 0.0;
  for (const auto& [i, c] : b.counts) {
    const double pa = a[i];
    acc += std::abs(pa - static_cast<double>(c) / static_cast<double>(b.total));
    covered += pa;
  }
  acc += std::max(0.0, 1.0 - covered);
  return std::clamp(0.5 * acc, 0.0, 1.0);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double tv(const ExactDistribution& a, const ExactDistribution& b) {
  check_same_space(a.q(), a.p(), b.q(), b.p());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return std::clamp(0.5 * acc, 0.0, 1.0);
}

double tv(const ExactDistribution& a, const EmpiricalDistribution& b) { return tv_exact_empirical(a, b); }
double tv(const EmpiricalDistribution& a, const ExactDistribution& b) { return tv_exact_empirical(b, a); }

double tv(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  check_same_space(a.q, a.p, b.q, b.p);
  double acc = 0.0;
  auto ia = a.counts.begin();
  auto ib = b.counts.begin();
  const double na = static_cast<double>(a.total);
  const double nb = static_cast<double>(b.total);
  while (ia != a.counts.end() || ib != b.counts.end()) {
    if (ib == b.counts.end() || (ia != a.counts.end() && ia->first < ib->first)) {
      acc += ia->second / na;
      ++ia;
    } else if (ia == a.counts.end() || ib->first < ia->first) {
      acc += ib->second / nb;
      ++ib;
    } else {
      acc += std::abs(ia->second / na - ib->second / nb);
      ++ia;
      ++ib;
    }
  }
  return std::clamp(0.5 * acc, 0.0, 1.0);
}

CorrelationMatrix cross_correlation(const SampleSet& samples) {
  if (samples.empty()) throw std::invalid_argument("cross_correlation: no samples");
  const int q = samples.q();
  const bool binary = samples.p() == 2;
  CorrelationMatrix c{q, std::vector<double>(static_cast<std::size_t>(q * q), 0.0)};
  for (std::size_t s = 0; s < samples.size(); ++s) {
    auto row = samples.row(s);
    for (int i = 0; i < q; ++i)
      for (int j = i + 1; j < q; ++j) {
        const double v = binary ? (2.0 * row[i] - 1.0) * (2.0 * row[j] - 1.0) : (row[i] == row[j] ? 1.0 : 0.0);
        c.values[static_cast<std::size_t>(i * q + j)] += v;
      }
  }
  const double n = static_cast<double>(samples.size());
  for (int i = 0; i < q; ++i) {
    c.values[static_cast<std::size_t>(i * q + i)] = 1.0;
    for (int j = i + 1; j < q; ++j) {
      double& v = c.values[static_cast<std::size_t>(i * q + j)];
      v /= n;
      c.values[static_cast<std::size_t>(j * q + i)] = v;
    }
  }
  return c;
}

CorrelationMatrix cross_correlation(const ExactDistribution& dist) {
  const int q = dist.q();
  const bool binary = dist.p() == 2;
  CorrelationMatrix c{q, std::vector<double>(static_cast<std::size_t>(q * q), 0.0)};
  Configuration x(static_cast<std::size_t>(q));
  for (StateIndex k = 0; k < dist.size(); ++k) {
    const double w = dist[k];
    if (w == 0.0) continue;
    decode_into(k, dist.p(), x);
    for (int i = 0; i < q; ++i)
      for (int j = i + 1; j < q; ++j)
        c.values[static_cast<std::size_t>(i * q + j)] +=
            w * (binary ? (2.0 * x[i] - 1.0) * (2.0 * x[j] - 1.0) : (x[i] == x[j] ? 1.0 : 0.0));
  }
  for (int i = 0; i < q; ++i) {
    c.values[static_cast<std::size_t>(i * q + i)] = 1.0;
    for (int j = i + 1; j < q; ++j) c.values[static_cast<std::size_t>(j * q + i)] = c.values[static_cast<std::size_t>(i * q + j)];
  }
  return c;
}

double cross_correlation_error(const CorrelationMatrix& a, const CorrelationMatrix& b) {
  if (a.q != b.q) throw std::invalid_argument("cross_correlation_error: shapes differ");
  if (a.q < 2) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < a.q; ++i)
    for (int j = i + 1; j < a.q; ++j) acc += std::abs(a(i, j) - b(i, j));
  return acc / (0.5 * a.q * (a.q - 1));
}

double cross_correlation_error(const SampleSet& a, const SampleSet& b) {
  if (a.q() != b.q() || a.p() != b.p()) throw std::invalid_argument("cross_correlation_error: shapes differ");
  return cross_correlation_error(cross_correlation(a), cross_correlation(b));
}

int encoded_dim(int q, int p) { return p == 2 ? q : q * p; }

std::vector<double> encode_rows(const SampleSet& samples, std::size_t max_rows) {
  const std::size_t n = std::min(max_rows, samples.size());
  const int p = samples.p();
  const auto d = static_cast<std::size_t>(encoded_dim(samples.q(), p));
  std::vector<double> out(n * d);
  for (std::size_t s = 0; s < n; ++s) {
    auto row = samples.row(s);
    double* o = out.data() + s * d;
    if (p == 2) {
      for (int i = 0; i < samples.q(); ++i) o[i] = 2.0 * row[i] - 1.0;
    } else {
      for (int i = 0; i < samples.q(); ++i)
        for (int r = 0; r < p; ++r) o[i * p + r] = (row[i] == r ? 1.0 : 0.0) - 1.0 / p;
    }
  }
  return out;
}

namespace {

double median_pairwise_distance(std::span<const double> x, std::size_t nx, std::span<const double> y, std::size_t ny,
                                std::size_t d) {
  // Pool at most 1000 evenly spaced rows from each side; the statistic is a heuristic.
  constexpr std::size_t kCap = 1000;
  std::vector<const double*> pts;
  auto take = [&](std::span<const double> z, std::size_t n) {
    const std::size_t m = std::min(n, kCap);
    for (std::size_t k = 0; k < m; ++k) pts.push_back(z.data() + (k * n / m) * d);
  };
  take(x, nx);
  take(y, ny);
  std::vector<double> dist;
  dist.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) d2 += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
      dist.push_back(std::sqrt(d2));
    }
  if (dist.empty()) return 0.0;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return *mid;
}

}  // namespace

MetricReport mmd(const SampleSet& a, const SampleSet& b, Bandwidth bandwidth, std::size_t max_points) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mmd: empty sample set");
  if (a.q() != b.q() || a.p() != b.p()) throw std::invalid_argument("mmd: shapes differ");
  const int dim = encoded_dim(a.q(), a.p());
  const auto x = encode_rows(a, max_points);
  const auto y = encode_rows(b, max_points);
  const std::size_t nx = x.size() / static_cast<std::size_t>(dim);
  const std::size_t ny = y.size() / static_cast<std::size_t>(dim);
  if (nx < 2 || ny < 2) throw std::invalid_argument("mmd: the unbiased estimator needs two rows per set");

  MetricReport rep;
  rep.metric = "mmd";
  rep.n_a = nx;
  rep.n_b = ny;
  double h = 0.0;
  if (std::holds_alternative<double>(bandwidth)) {
    h = std::get<double>(bandwidth);
    rep.parameters["bandwidth_rule"] = "fixed";
  } else {
    h = median_pairwise_distance(x, nx, y, ny, static_cast<std::size_t>(dim));
    rep.parameters["bandwidth_rule"] = "median";
  }
  if (!(h > 0.0) || !std::isfinite(h)) throw std::domain_error("mmd: degenerate bandwidth");
  rep.parameters["bandwidth"] = format_double(h);
  rep.parameters["kernel"] = "gaussian";
  rep.parameters["encoding"] = a.p() == 2 ? "spin" : "centered-indicator";

  const double kxx = kernels::gaussian_kernel_sum(x, x, dim, h, true);
  const double kyy = kernels::gaussian_kernel_sum(y, y, dim, h, true);
  const double kxy = kernels::gaussian_kernel_sum(x, y, dim, h, false);
  const double fx = static_cast<double>(nx), fy = static_cast<double>(ny);
  rep.value = kxx / (fx * (fx - 1.0)) + kyy / (fy * (fy - 1.0)) - 2.0 * kxy / (fx * fy);
  return rep;
}

MetricReport tv_report(const SampleSet& generated, const ExactDistribution& reference) {
  MetricReport rep;
  rep.metric = "tv";
  rep.value = tv(reference, empirical_from_samples(generated));
  rep.n_a = generated.size();
  rep.parameters["mode"] = "empirical-vs-exact";
  return rep;
}

MetricReport tv_report(const SampleSet& generated, const SampleSet& reference) {
  MetricReport rep;
  rep.metric = "tv";
  rep.value = tv(empirical_from_samples(generated), empirical_from_samples(reference));
  rep.n_a = generated.size();
  rep.n_b = reference.size();
  rep.parameters["mode"] = "empirical-vs-empirical";
  return rep;
}

MetricReport cross_correlation_report(const SampleSet& generated, const SampleSet& reference) {
  MetricReport rep;
  rep.metric = "cross_correlation_error";
  rep.value = cross_correlation_error(generated, reference);
  rep.n_a = generated.size();
  rep.n_b = reference.size();
  rep.parameters["norm"] = "mean-abs-upper-triangle";
  rep.parameters["statistic"] = generated.p() == 2 ? "spin-product" : "agreement";
  return rep;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["metric"] = metric;
  j["value"] = value;
  j["n_a"] = n_a;
  j["n_b"] = n_b;
  j["parameters"] = parameters;
  return j.dump();
}

}  // namespace ndiff
