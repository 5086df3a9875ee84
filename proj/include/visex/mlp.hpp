#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "visex/rng.hpp"

namespace visex {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Fully connected network with rectifier hidden layers and a linear output layer.
// Inputs are row-major batches: one sample per row. A network with a single
// width is the identity map.
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
  };

  Mlp() = default;
  // Zero-initialized parameters.
  explicit Mlp(std::vector<std::size_t> widths);
  static Mlp identity(std::size_t width) { return Mlp({width}); }

  // Zero-mean normal weights with standard deviation scale / sqrt(fan_in); zero biases.
  void init_random(Rng& rng, double scale);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  std::size_t layer_count() const { return weights_.size(); }
  bool is_identity() const { return weights_.empty(); }

  const Matrix& weight(std::size_t layer) const { return weights_[layer]; }
  const Vector& bias(std::size_t layer) const { return biases_[layer]; }
  Matrix& weight(std::size_t layer) { return weights_[layer]; }
  Vector& bias(std::size_t layer) { return biases_[layer]; }

  // Per layer: weights row-major (out x in), then biases.
  std::size_t parameter_count() const;
  Vector parameters() const;
  void set_parameters(const Eigen::Ref<const Vector>& flat);

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;

  // Adds dLoss/dParams to grad (length parameter_count) and returns dLoss/dInput.
  Matrix backward(const Cache& cache, const Matrix& d_out, Eigen::Ref<Vector> grad) const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

// First-order optimizers over flat parameter vectors.
class Optimizer {
 public:
  enum class Kind { adam, sgd };

  Optimizer(Kind kind, double step_size, std::size_t parameter_count);

  void step(Vector& params, const Vector& grad);
  Kind kind() const { return kind_; }
  double step_size() const { return step_size_; }

 private:
  Kind kind_;
  double step_size_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::size_t t_ = 0;
  Vector m_;
  Vector v_;
};

Optimizer::Kind optimizer_kind_from_string(const std::string& s);
std::string to_string(Optimizer::Kind kind);

}  // namespace visex
