#pragma once

// Data-parallel inner loops. Each kernel in `ndiff::kernels` is the OpenMP
// version used by the library; `ndiff::serial` keeps a plain single-threaded
// reference of the same computation for tests and benchmarks.
//
// Parallel reductions are split into fixed-size chunks that are combined in
// chunk order, so results do not depend on the thread count.

#include <span>
#include <vector>

#include "ndiff/mlp.hpp"
#include "ndiff/models.hpp"
#include "ndiff/reverse.hpp"

namespace ndiff {

namespace kernels {

inline constexpr std::size_t kGradientChunk = 16;

// H(decode(i)) for every state index i.
std::vector<double> gibbs_log_weights(const GibbsModel& model);

// One round-robin forward kernel applied to a full table (site u):
// out(x) = (b - a) mu(x) + a * sum_r mu(x with site u = r).
std::vector<double> push_forward_table(std::span<const double> mu, int q, int p, int u, double a, double b);

// One reverse kernel applied to a full table; rows come from row_fn at step n.
// Work is split by fibres (states sharing x_{-u}), which never overlap.
std::vector<double> reverse_step_table(std::span<const double> mu, int q, int p, int n, int u,
                                       const ReverseRowFn& row_fn);

// Screening loss over a batch of encoded inputs (row-major, batch x d_in)
// with target symbols. Adds scale * d(loss sum)/d(theta) to grad and returns
// the unscaled loss sum.
double batch_gradient(const Mlp& net, std::span<const double> features, std::span<const int> targets, double scale,
                      std::span<double> grad);

// Loss sum only.
double batch_loss(const Mlp& net, std::span<const double> features, std::span<const int> targets);

// sum_{i,j} exp(-|x_i - y_j|^2 / (2 h^2)) over row-major point sets; with
// exclude_diagonal the i == j terms are skipped (x and y must then coincide).
double gaussian_kernel_sum(std::span<const double> x, std::span<const double> y, int dim, double bandwidth,
                           bool exclude_diagonal);

}  // namespace kernels

namespace serial {

std::vector<double> gibbs_log_weights(const GibbsModel& model);
std::vector<double> push_forward_table(std::span<const double> mu, int q, int p, int u, double a, double b);
std::vector<double> reverse_step_table(std::span<const double> mu, int q, int p, int n, int u,
                                       const ReverseRowFn& row_fn);
double batch_gradient(const Mlp& net, std::span<const double> features, std::span<const int> targets, double scale,
                      std::span<double> grad);
double gaussian_kernel_sum(std::span<const double> x, std::span<const double> y, int dim, double bandwidth,
                           bool exclude_diagonal);

}  // namespace serial

}  // namespace ndiff
