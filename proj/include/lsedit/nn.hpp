#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lsedit/core.hpp"

namespace lsedit::nn {

using Rng = std::mt19937_64;

// Fully connected layer y = W x + b, with W stored out x in. Batches are columns.
struct Dense {
  Matrix weight;
  Vector bias;

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }

  Matrix forward(const Matrix& x) const { return (weight * x).colwise() + bias; }
  bool operator==(const Dense& o) const {
    return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() && weight == o.weight && bias == o.bias;
  }
};

// U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
Dense make_dense(Eigen::Index in, Eigen::Index out, Rng& rng);
Dense zeros_like(const Dense& layer);
// Rounds every parameter to the nearest 32-bit float.
void round_to_float(Dense& layer);

inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x);
Matrix silu(const Matrix& x);
// d silu / dx evaluated at the pre-activation.
Matrix silu_derivative(const Matrix& pre);

// Accumulates gradients of a layer given the upstream gradient and the layer input.
void accumulate(Dense& grad, const Matrix& upstream, const Matrix& input);

// Flat view over one parameter block and its gradient.
struct ParamRef {
  double* value;
  const double* grad;
  std::size_t size;
};

std::vector<ParamRef> param_refs(std::span<Dense> params, std::span<const Dense> grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are allocated on the first step
// and matched to parameter blocks by position.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void step(std::span<const ParamRef> params);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace lsedit::nn
