#include "ndiff/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ndiff {

namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void check_shape(const MlpShape& s) {
  if (s.input_dim < 1 || s.width < 1 || s.output_dim < 1 || s.depth < 1)
    throw std::invalid_argument("MlpShape: dimensions and depth must be positive");
}

}  // namespace

Mlp::Mlp(const MlpShape& shape) : shape_(shape) {
  check_shape(shape);
  std::size_t offset = 0;
  auto add_layer = [&](int in, int out, bool normalized) {
    DenseLayer L;
    L.in = in;
    L.out = out;
    L.normalized = normalized;
    L.weight = offset;
    offset += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    L.bias = offset;
    offset += static_cast<std::size_t>(out);
    if (normalized) {
      L.gain = offset;
      offset += static_cast<std::size_t>(out);
      L.shift = offset;
      offset += static_cast<std::size_t>(out);
    }
    layers_.push_back(L);
  };
  add_layer(shape.input_dim, shape.width, true);
  for (int d = 1; d < shape.depth; ++d) add_layer(shape.width, shape.width, true);
  add_layer(shape.width, shape.output_dim, false);
  params_.assign(offset, 0.0);
  for (const auto& L : layers_)
    if (L.normalized)
      for (int i = 0; i < L.out; ++i) params_[L.gain + static_cast<std::size_t>(i)] = 1.0;
}

Mlp Mlp::initialized(const MlpShape& shape, Rng& rng) {
  Mlp m(shape);
  for (const auto& L : m.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(L.in));
    const std::size_t n_w = static_cast<std::size_t>(L.in) * static_cast<std::size_t>(L.out);
    for (std::size_t i = 0; i < n_w; ++i) m.params_[L.weight + i] = bound * (2.0 * uniform01(rng) - 1.0);
    for (int i = 0; i < L.out; ++i) m.params_[L.bias + static_cast<std::size_t>(i)] = bound * (2.0 * uniform01(rng) - 1.0);
  }
  return m;
}

std::vector<ParamGroup> Mlp::param_groups() const {
  std::vector<ParamGroup> groups;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& L = layers_[k];
    const std::string prefix = L.normalized ? "block" + std::to_string(k) : "output";
    groups.push_back({prefix + ".weight", L.weight, static_cast<std::size_t>(L.in) * static_cast<std::size_t>(L.out)});
    groups.push_back({prefix + ".bias", L.bias, static_cast<std::size_t>(L.out)});
    if (L.normalized) {
      groups.push_back({prefix + ".gain", L.gain, static_cast<std::size_t>(L.out)});
      groups.push_back({prefix + ".shift", L.shift, static_cast<std::size_t>(L.out)});
    }
  }
  return groups;
}

void Mlp::forward(std::span<const double> x, std::span<double> out) const {
  thread_local MlpWorkspace ws;
  forward(x, out, ws);
}

void Mlp::forward(std::span<const double> x, std::span<double> out, MlpWorkspace& ws) const {
  if (static_cast<int>(x.size()) != shape_.input_dim || static_cast<int>(out.size()) != shape_.output_dim)
    throw std::invalid_argument("Mlp::forward: shape mismatch");
  const std::size_t n_layers = layers_.size();
  ws.inputs.resize(n_layers);
  ws.xhat.resize(n_layers);
  ws.y.resize(n_layers);
  ws.inv_std.resize(n_layers);
  ws.inputs[0].assign(x.begin(), x.end());
  const double* P = params_.data();

  for (std::size_t k = 0; k < n_layers; ++k) {
    const DenseLayer& L = layers_[k];
    const double* a = ws.inputs[k].data();
    double* z = nullptr;
    std::vector<double>& xh = ws.xhat[k];
    if (L.normalized) {
      xh.resize(static_cast<std::size_t>(L.out));
      z = xh.data();
    } else {
      z = out.data();
    }
    for (int i = 0; i < L.out; ++i) {
      const double* w = P + L.weight + static_cast<std::size_t>(i) * static_cast<std::size_t>(L.in);
      double acc = P[L.bias + static_cast<std::size_t>(i)];
      for (int j = 0; j < L.in; ++j) acc += w[j] * a[j];
      z[i] = acc;
    }
    if (!L.normalized) break;

    double mean = 0.0;
    for (int i = 0; i < L.out; ++i) mean += z[i];
    mean /= L.out;
    double var = 0.0;
    for (int i = 0; i < L.out; ++i) var += (z[i] - mean) * (z[i] - mean);
    var /= L.out;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    ws.inv_std[k] = inv;
    std::vector<double>& y = ws.y[k];
    y.resize(static_cast<std::size_t>(L.out));
    std::vector<double>& next = ws.inputs[k + 1];
    next.resize(static_cast<std::size_t>(L.out));
    for (int i = 0; i < L.out; ++i) {
      xh[i] = (z[i] - mean) * inv;
      y[i] = P[L.gain + static_cast<std::size_t>(i)] * xh[i] + P[L.shift + static_cast<std::size_t>(i)];
      next[i] = y[i] * sigmoid(y[i]);
    }
  }
}

void Mlp::backward(std::span<const double> grad_out, MlpWorkspace& ws, std::span<double> grad) const {
  if (grad.size() != params_.size() || static_cast<int>(grad_out.size()) != shape_.output_dim)
    throw std::invalid_argument("Mlp::backward: shape mismatch");
  const double* P = params_.data();
  double* G = grad.data();
  // grad_z holds d(loss)/d(pre-activation) of the current layer.
  ws.grad_z.assign(grad_out.begin(), grad_out.end());

  for (std::size_t kk = layers_.size(); kk-- > 0;) {
    const DenseLayer& L = layers_[kk];
    const double* a = ws.inputs[kk].data();

    if (L.normalized) {
      // grad_z currently holds d/d(activation output); push it through SiLU and LayerNorm.
      const std::vector<double>& y = ws.y[kk];
      const std::vector<double>& xh = ws.xhat[kk];
      double mean_dxh = 0.0;
      double mean_dxh_xh = 0.0;
      for (int i = 0; i < L.out; ++i) {
        const double s = sigmoid(y[i]);
        const double dy = ws.grad_z[i] * (s + y[i] * s * (1.0 - s));
        G[L.gain + static_cast<std::size_t>(i)] += dy * xh[i];
        G[L.shift + static_cast<std::size_t>(i)] += dy;
        const double dxh = dy * P[L.gain + static_cast<std::size_t>(i)];
        ws.grad_z[i] = dxh;
        mean_dxh += dxh;
        mean_dxh_xh += dxh * xh[i];
      }
      mean_dxh /= L.out;
      mean_dxh_xh /= L.out;
      const double inv = ws.inv_std[kk];
      for (int i = 0; i < L.out; ++i) ws.grad_z[i] = inv * (ws.grad_z[i] - mean_dxh - xh[i] * mean_dxh_xh);
    }

    for (int i = 0; i < L.out; ++i) {
      const double gz = ws.grad_z[i];
      double* gw = G + L.weight + static_cast<std::size_t>(i) * static_cast<std::size_t>(L.in);
      for (int j = 0; j < L.in; ++j) gw[j] += gz * a[j];
      G[L.bias + static_cast<std::size_t>(i)] += gz;
    }
    if (kk == 0) break;
    ws.grad_a.assign(static_cast<std::size_t>(L.in), 0.0);
    for (int i = 0; i < L.out; ++i) {
      const double gz = ws.grad_z[i];
      const double* w = P + L.weight + static_cast<std::size_t>(i) * static_cast<std::size_t>(L.in);
      for (int j = 0; j < L.in; ++j) ws.grad_a[j] += gz * w[j];
    }
    ws.grad_z.swap(ws.grad_a);
  }
}

}  // namespace ndiff
