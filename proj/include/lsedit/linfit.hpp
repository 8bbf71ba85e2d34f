#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsedit/core.hpp"

namespace lsedit {

enum class PredictorKind { ridge, logistic };

std::string_view to_string(PredictorKind kind);

// y_hat = [z | covariates] . weights + intercept (sigmoid applied for logistic).
// Covariate coefficients follow the d latent coefficients.
struct LinearPredictor {
  Vector weights;
  double intercept = 0.0;
  PredictorKind kind = PredictorKind::ridge;
  std::string target;
  std::vector<std::string> covariates;
  double penalty = 0.0;  // ridge alpha, or logistic l2
  // Optional ordered bin boundaries on the predictor output (empirical
  // quantiles of the training predictions); used by demographic filters.
  std::vector<double> bins;

  std::size_t latent_dimension() const { return static_cast<std::size_t>(weights.size()) - covariates.size(); }
  auto latent_block() const { return weights.head(static_cast<Eigen::Index>(latent_dimension())); }

  bool operator==(const LinearPredictor& other) const;
};

// Minimizes ||X w + w0 - y||^2 + alpha ||w||^2 with X = [codes | covariate labels];
// the intercept is not penalized.
LinearPredictor fit_ridge(const AttributeTable& table, std::string_view target,
                          std::span<const std::string> covariates, double alpha);

// Minimizes the negative log-likelihood of sigmoid(X w + w0) plus (l2/2) ||w||^2
// by damped Newton iteration until the gradient norm is below 1e-6.
LinearPredictor fit_logistic(const AttributeTable& table, std::string_view target,
                             std::span<const std::string> covariates, double l2);

double affine_value(const LinearPredictor& pred, const Vector& z, std::span<const double> covariate_values = {});
double predict(const LinearPredictor& pred, const Vector& z, std::span<const double> covariate_values = {});
inline double predict(const LinearPredictor& pred, const LatentCode& code, std::span<const double> covariate_values = {}) {
  return predict(pred, code.z, covariate_values);
}

// Uses only the latent block of the weights. Zero latent block gives a
// degenerate direction (flagged, never silently normalized).
Direction extract_direction(const LinearPredictor& pred);

// All other AU-role attributes of the table, in column order.
std::vector<std::string> peer_covariates(const AttributeTable& table, std::string_view target);

// Fits one ridge direction per target; with `condition_on_peers` each target
// is conditioned on every other AU-role attribute.
DirectionBank fit_direction_bank(const AttributeTable& table, std::span<const std::string> targets,
                                 bool condition_on_peers, double alpha);

// Empirical quantile boundaries of the predictor output over the table
// (`bins - 1` interior boundaries, e.g. terciles for bins = 3).
std::vector<double> quantile_boundaries(const LinearPredictor& pred, const AttributeTable& table, std::size_t bins);

// Predictors for attribute filters: logistic for binary attributes, ridge with
// tercile boundaries for continuous ones.
std::vector<LinearPredictor> fit_attribute_predictors(const AttributeTable& table, std::span<const std::string> names,
                                                      double alpha, double l2);

// Predictor-set text format:
//
//   dimension=<d>
//   predictor <target> kind=<ridge|logistic> intercept=<b> penalty=<p> covariates=<a,b|-> bins=<x,y|->
//   <d + c weights>
void save_predictors(std::span<const LinearPredictor> predictors, std::size_t dimension,
                     const std::filesystem::path& path);
std::vector<LinearPredictor> load_predictors(const std::filesystem::path& path);

}  // namespace lsedit
