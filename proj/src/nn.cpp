#include "lsedit/nn.hpp"

#include "lsedit/errors.hpp"

namespace lsedit::nn {

Dense make_dense(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Dense layer{Matrix(out, in), Vector(out)};
  for (Eigen::Index j = 0; j < in; ++j) {
    for (Eigen::Index i = 0; i < out; ++i) layer.weight(i, j) = dist(rng);
  }
  for (Eigen::Index i = 0; i < out; ++i) layer.bias[i] = dist(rng);
  return layer;
}

Dense zeros_like(const Dense& layer) {
  return {Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())};
}

void round_to_float(Dense& layer) {
  layer.weight = layer.weight.cast<float>().cast<double>();
  layer.bias = layer.bias.cast<float>().cast<double>();
}

Matrix sigmoid(const Matrix& x) { return x.unaryExpr([](double t) { return sigmoid(t); }); }

Matrix silu(const Matrix& x) { return x.unaryExpr([](double t) { return t * sigmoid(t); }); }

Matrix silu_derivative(const Matrix& pre) {
  return pre.unaryExpr([](double t) {
    const double s = sigmoid(t);
    return s * (1.0 + t * (1.0 - s));
  });
}

void accumulate(Dense& grad, const Matrix& upstream, const Matrix& input) {
  grad.weight.noalias() += upstream * input.transpose();
  grad.bias += upstream.rowwise().sum();
}

std::vector<ParamRef> param_refs(std::span<Dense> params, std::span<const Dense> grads) {
  if (params.size() != grads.size()) throw Error("param_refs: parameter and gradient counts differ");
  std::vector<ParamRef> refs;
  refs.reserve(params.size() * 2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    refs.push_back({params[i].weight.data(), grads[i].weight.data(), static_cast<std::size_t>(params[i].weight.size())});
    refs.push_back({params[i].bias.data(), grads[i].bias.data(), static_cast<std::size_t>(params[i].bias.size())});
  }
  return refs;
}

void Adam::step(std::span<const ParamRef> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size, 0.0);
      v_.emplace_back(p.size, 0.0);
    }
  }
  if (m_.size() != params.size()) throw Error("Adam: parameter layout changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size; ++i) {
      const double g = p.grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      p.value[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

}  // namespace lsedit::nn
