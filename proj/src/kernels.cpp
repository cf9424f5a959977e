#include "ndiff/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include "ndiff/parallel.hpp"

namespace ndiff {

namespace {

// Screening loss for one sample and its gradient with respect to the output:
// loss = exp(-(y_t - mean(y))), d loss / d y_s = -loss * (1{s=t} - 1/p).
inline double screening_loss(std::span<const double> y, int target, std::span<double> grad_y) {
  const int p = static_cast<int>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= p;
  const double loss = std::exp(-(y[target] - mean));
  if (!grad_y.empty())
    for (int s = 0; s < p; ++s) grad_y[s] = -loss * ((s == target ? 1.0 : 0.0) - 1.0 / p);
  return loss;
}

void check_batch(const Mlp& net, std::span<const double> features, std::span<const int> targets) {
  const auto d = static_cast<std::size_t>(net.shape().input_dim);
  if (features.size() != targets.size() * d) throw std::invalid_argument("batch features do not match targets");
}

template <class Body>
void for_each_fibre(std::size_t n_fibres, bool parallel, Body body) {
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::size_t f = 0; f < n_fibres; ++f) body(f);
  } else {
    for (std::size_t f = 0; f < n_fibres; ++f) body(f);
  }
}

std::vector<double> push_forward_impl(std::span<const double> mu, int q, int p, int u, double a, double b,
                                      bool parallel) {
  const StateIndex stride = site_stride(u, p);
  const StateIndex block = stride * static_cast<StateIndex>(p);
  const std::size_t n_fibres = mu.size() / static_cast<std::size_t>(p);
  std::vector<double> out(mu.size());
  (void)q;
  for_each_fibre(n_fibres, parallel, [&](std::size_t f) {
    const StateIndex base = (f / stride) * block + f % stride;
    double fibre_mass = 0.0;
    for (int r = 0; r < p; ++r) fibre_mass += mu[base + static_cast<StateIndex>(r) * stride];
    for (int r = 0; r < p; ++r) {
      const StateIndex i = base + static_cast<StateIndex>(r) * stride;
      out[i] = (b - a) * mu[i] + a * fibre_mass;
    }
  });
  return out;
}

std::vector<double> reverse_step_impl(std::span<const double> mu, int q, int p, int n, int u,
                                      const ReverseRowFn& row_fn, bool parallel) {
  const StateIndex stride = site_stride(u, p);
  const StateIndex block = stride * static_cast<StateIndex>(p);
  const std::size_t n_fibres = mu.size() / static_cast<std::size_t>(p);
  std::vector<double> out(mu.size(), 0.0);
  auto body = [&](std::size_t f, Configuration& from, std::vector<double>& row) {
    const StateIndex base = (f / stride) * block + f % stride;
    decode_into(base, p, from);
    for (int r_from = 0; r_from < p; ++r_from) {
      const StateIndex from_index = base + static_cast<StateIndex>(r_from) * stride;
      const double mass = mu[from_index];
      if (mass == 0.0) continue;
      from[u - 1] = r_from;
      row_fn(n, from_index, from, row);
      for (int r = 0; r < p; ++r) out[base + static_cast<StateIndex>(r) * stride] += row[r] * mass;
    }
  };
  if (parallel) {
#pragma omp parallel
    {
      Configuration from(static_cast<std::size_t>(q));
      std::vector<double> row(static_cast<std::size_t>(p));
#pragma omp for schedule(static)
      for (std::size_t f = 0; f < n_fibres; ++f) body(f, from, row);
    }
  } else {
    Configuration from(static_cast<std::size_t>(q));
    std::vector<double> row(static_cast<std::size_t>(p));
    for (std::size_t f = 0; f < n_fibres; ++f) body(f, from, row);
  }
  return out;
}

double kernel_row_sum(std::span<const double> x, std::span<const double> y, std::size_t i, int dim, double inv_two_h2,
                      bool exclude_diagonal) {
  const std::size_t ny = y.size() / static_cast<std::size_t>(dim);
  const double* xi = x.data() + i * static_cast<std::size_t>(dim);
  double acc = 0.0;
  for (std::size_t j = 0; j < ny; ++j) {
    if (exclude_diagonal && j == i) continue;
    const double* yj = y.data() + j * static_cast<std::size_t>(dim);
    double d2 = 0.0;
    for (int k = 0; k < dim; ++k) d2 += (xi[k] - yj[k]) * (xi[k] - yj[k]);
    acc += std::exp(-d2 * inv_two_h2);
  }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------

namespace kernels {

std::vector<double> gibbs_log_weights(const GibbsModel& model) {
  const int q = num_sites(model);
  const int p = alphabet_size(model);
  const StateIndex n = state_count(q, p);
  std::vector<double> out(n);
#pragma omp parallel
  {
    Configuration c(static_cast<std::size_t>(q));
#pragma omp for schedule(static)
    for (StateIndex i = 0; i < n; ++i) {
      decode_into(i, p, c);
      out[i] = energy(model, c);
    }
  }
  return out;
}

std::vector<double> push_forward_table(std::span<const double> mu, int q, int p, int u, double a, double b) {
  return push_forward_impl(mu, q, p, u, a, b, true);
}

std::vector<double> reverse_step_table(std::span<const double> mu, int q, int p, int n, int u,
                                       const ReverseRowFn& row_fn) {
  return reverse_step_impl(mu, q, p, n, u, row_fn, true);
}

double batch_gradient(const Mlp& net, std::span<const double> features, std::span<const int> targets, double scale,
                      std::span<double> grad) {
  check_batch(net, features, targets);
  const std::size_t batch = targets.size();
  const std::size_t d = static_cast<std::size_t>(net.shape().input_dim);
  const std::size_t p = static_cast<std::size_t>(net.shape().output_dim);
  const std::size_t chunks = (batch + kGradientChunk - 1) / kGradientChunk;
  if (chunks <= 1) return serial::batch_gradient(net, features, targets, scale, grad);

  std::vector<std::vector<double>> partial(chunks);
  std::vector<double> loss(chunks, 0.0);
#pragma omp parallel
  {
    MlpWorkspace ws;
    std::vector<double> y(p), gy(p);
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < chunks; ++c) {
      partial[c].assign(net.param_count(), 0.0);
      const std::size_t end = std::min(batch, (c + 1) * kGradientChunk);
      for (std::size_t i = c * kGradientChunk; i < end; ++i) {
        net.forward(features.subspan(i * d, d), y, ws);
        loss[c] += screening_loss(y, targets[i], gy);
        for (double& g : gy) g *= scale;
        net.backward(gy, ws, partial[c]);
      }
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    total += loss[c];
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += partial[c][k];
  }
  return total;
}

double batch_loss(const Mlp& net, std::span<const double> features, std::span<const int> targets) {
  check_batch(net, features, targets);
  const std::size_t batch = targets.size();
  const std::size_t d = static_cast<std::size_t>(net.shape().input_dim);
  const std::size_t p = static_cast<std::size_t>(net.shape().output_dim);
  const std::size_t chunks = (batch + kGradientChunk - 1) / kGradientChunk;
  std::vector<double> loss(chunks, 0.0);
#pragma omp parallel
  {
    MlpWorkspace ws;
    std::vector<double> y(p);
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t end = std::min(batch, (c + 1) * kGradientChunk);
      for (std::size_t i = c * kGradientChunk; i < end; ++i) {
        net.forward(features.subspan(i * d, d), y, ws);
        loss[c] += screening_loss(y, targets[i], {});
      }
    }
  }
  double total = 0.0;
  for (double v : loss) total += v;
  return total;
}

double gaussian_kernel_sum(std::span<const double> x, std::span<const double> y, int dim, double bandwidth,
                           bool exclude_diagonal) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
  const std::size_t nx = x.size() / static_cast<std::size_t>(dim);
  const double inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  std::vector<double> rows(nx);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < nx; ++i) rows[i] = kernel_row_sum(x, y, i, dim, inv_two_h2, exclude_diagonal);
  double total = 0.0;
  for (double v : rows) total += v;
  return total;
}

}  // namespace kernels

// ---------------------------------------------------------------------------

namespace serial {

std::vector<double> gibbs_log_weights(const GibbsModel& model) {
  const int q = num_sites(model);
  const int p = alphabet_size(model);
  const StateIndex n = state_count(q, p);
  std::vector<double> out(n);
  Configuration c(static_cast<std::size_t>(q));
  for (StateIndex i = 0; i < n; ++i) {
    decode_into(i, p, c);
    out[i] = energy(model, c);
  }
  return out;
}

std::vector<double> push_forward_table(std::span<const double> mu, int q, int p, int u, double a, double b) {
  return push_forward_impl(mu, q, p, u, a, b, false);
}

std::vector<double> reverse_step_table(std::span<const double> mu, int q, int p, int n, int u,
                                       const ReverseRowFn& row_fn) {
  return reverse_step_impl(mu, q, p, n, u, row_fn, false);
}

double batch_gradient(const Mlp& net, std::span<const double> features, std::span<const int> targets, double scale,
                      std::span<double> grad) {
  check_batch(net, features, targets);
  const std::size_t d = static_cast<std::size_t>(net.shape().input_dim);
  const std::size_t p = static_cast<std::size_t>(net.shape().output_dim);
  MlpWorkspace ws;
  std::vector<double> y(p), gy(p);
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    net.forward(features.subspan(i * d, d), y, ws);
    total += screening_loss(y, targets[i], gy);
    for (double& g : gy) g *= scale;
    net.backward(gy, ws, grad);
  }
  return total;
}

double gaussian_kernel_sum(std::span<const double> x, std::span<const double> y, int dim, double bandwidth,
                           bool exclude_diagonal) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
  const std::size_t nx = x.size() / static_cast<std::size_t>(dim);
  const double inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  double total = 0.0;
  for (std::size_t i = 0; i < nx; ++i) total += kernel_row_sum(x, y, i, dim, inv_two_h2, exclude_diagonal);
  return total;
}

}  // namespace serial

}  // namespace ndiff
