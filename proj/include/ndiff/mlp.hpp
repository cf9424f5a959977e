#pragma once

// Small dense network used for the partial energies:
//   input block   Linear(d_in -> h) -> LayerNorm(h) -> SiLU
//   hidden blocks Linear(h -> h)    -> LayerNorm(h) -> SiLU   (depth - 1 of them)
//   output        Linear(h -> d_out)
// Parameters live in one flat array so optimizers and checkpoints treat the
// network as a single vector.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ndiff/rng.hpp"

namespace ndiff {

struct MlpShape {
  int input_dim = 0;
  int width = 0;
  int depth = 1;
  int output_dim = 0;

  bool operator==(const MlpShape&) const = default;
};

// Offsets into the flat parameter array. gain/shift are unused for the
// output layer.
struct DenseLayer {
  int in = 0;
  int out = 0;
  bool normalized = false;
  std::size_t weight = 0;  // out x in, row-major
  std::size_t bias = 0;
  std::size_t gain = 0;
  std::size_t shift = 0;
};

struct ParamGroup {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Activations kept by a forward pass for the matching backward pass.
struct MlpWorkspace {
  std::vector<std::vector<double>> inputs;  // input of each layer
  std::vector<std::vector<double>> xhat;    // normalized pre-activations
  std::vector<std::vector<double>> y;       // after the affine LayerNorm step
  std::vector<double> inv_std;
  std::vector<double> grad_a;
  std::vector<double> grad_z;
};

class Mlp {
 public:
  static constexpr double kLayerNormEps = 1e-5;

  // All parameters zero except LayerNorm gains, which start at one.
  explicit Mlp(const MlpShape& shape);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static Mlp initialized(const MlpShape& shape, Rng& rng);

  const MlpShape& shape() const { return shape_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<ParamGroup> param_groups() const;

  void forward(std::span<const double> x, std::span<double> out) const;
  void forward(std::span<const double> x, std::span<double> out, MlpWorkspace& ws) const;
  // Adds d(loss)/d(params) to grad, given d(loss)/d(out) for the input of the
  // last forward(x, out, ws) call.
  void backward(std::span<const double> grad_out, MlpWorkspace& ws, std::span<double> grad) const;

 private:
  MlpShape shape_;
  std::vector<DenseLayer> layers_;
  std::vector<double> params_;
};

}  // namespace ndiff
