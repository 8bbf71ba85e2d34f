#include "lsedit/linfit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lsedit/errors.hpp"
#include "lsedit/table_io.hpp"

namespace lsedit {

std::string_view to_string(PredictorKind kind) { return kind == PredictorKind::ridge ? "ridge" : "logistic"; }

bool LinearPredictor::operator==(const LinearPredictor& other) const {
  return weights.size() == other.weights.size() && weights == other.weights && intercept == other.intercept &&
         kind == other.kind && target == other.target && covariates == other.covariates &&
         penalty == other.penalty && bins == other.bins;
}

namespace {

struct Design {
  Matrix x;
  Vector y;
};

Design build_design(const AttributeTable& table, std::string_view target, std::span<const std::string> covariates) {
  const auto target_idx = table.index_of(target);
  std::vector<std::size_t> cov_idx;
  for (const auto& c : covariates) {
    if (c == target) throw ValidationError("target '" + std::string(target) + "' listed as its own covariate");
    cov_idx.push_back(table.index_of(c));
  }
  if (table.rows() == 0) throw ValidationError("cannot fit '" + std::string(target) + "' on an empty table");
  const auto n = static_cast<Eigen::Index>(table.rows());
  const auto d = static_cast<Eigen::Index>(table.dimension());
  Design design;
  design.x.resize(n, d + static_cast<Eigen::Index>(cov_idx.size()));
  design.x.leftCols(d) = table.codes();
  for (std::size_t j = 0; j < cov_idx.size(); ++j) {
    design.x.col(d + static_cast<Eigen::Index>(j)) = table.labels().col(static_cast<Eigen::Index>(cov_idx[j]));
  }
  design.y = table.labels().col(static_cast<Eigen::Index>(target_idx));
  return design;
}

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

}  // namespace

LinearPredictor fit_ridge(const AttributeTable& table, std::string_view target, std::span<const std::string> covariates,
                          double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("ridge alpha must be a non-negative number");
  if (table.attribute(target).kind != AttributeKind::continuous) {
    throw ValidationError("ridge target '" + std::string(target) + "' must be a continuous attribute");
  }
  const auto design = build_design(table, target, covariates);
  const auto p = design.x.cols();

  const Eigen::RowVectorXd x_mean = design.x.colwise().mean();
  const double y_mean = design.y.mean();
  const Matrix xc = design.x.rowwise() - x_mean;
  const Vector yc = design.y.array() - y_mean;

  Matrix gram = xc.transpose() * xc;
  gram.diagonal().array() += alpha;
  const Eigen::LDLT<Matrix> solver(gram);
  Vector w = solver.solve(xc.transpose() * yc);
  if (solver.info() != Eigen::Success || !w.allFinite()) {
    throw NumericalError("ridge system for '" + std::string(target) + "' is singular; use alpha > 0");
  }
  if (p == 0) w = Vector();

  LinearPredictor pred;
  pred.weights = std::move(w);
  pred.intercept = y_mean - x_mean.dot(pred.weights);
  pred.kind = PredictorKind::ridge;
  pred.target = std::string(target);
  pred.covariates.assign(covariates.begin(), covariates.end());
  pred.penalty = alpha;
  return pred;
}

LinearPredictor fit_logistic(const AttributeTable& table, std::string_view target,
                             std::span<const std::string> covariates, double l2) {
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ValidationError("logistic l2 must be a non-negative number");
  if (table.attribute(target).kind != AttributeKind::binary) {
    throw ValidationError("logistic target '" + std::string(target) + "' must be a binary attribute");
  }
  const auto design = build_design(table, target, covariates);
  const double positives = design.y.sum();
  if (positives == 0.0 || positives == static_cast<double>(design.y.size())) {
    throw ValidationError("logistic target '" + std::string(target) + "' has a single class");
  }
  const auto n = design.x.rows();
  const auto p = design.x.cols();
  // Augmented design [X | 1]; the last parameter is the intercept.
  Matrix xa(n, p + 1);
  xa.leftCols(p) = design.x;
  xa.col(p).setOnes();
  Vector penalty = Vector::Constant(p + 1, l2);
  penalty[p] = 0.0;

  auto objective = [&](const Vector& beta) {
    const Vector t = xa * beta;
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) nll += softplus(t[i]) - design.y[i] * t[i];
    return nll + 0.5 * (penalty.array() * beta.array().square()).sum();
  };

  Vector beta = Vector::Zero(p + 1);
  double current = objective(beta);
  constexpr double kTolerance = 1e-6;
  constexpr int kMaxIterations = 500;
  bool converged = false;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    const Vector t = xa * beta;
    Vector prob(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(t[i]);
      weight[i] = prob[i] * (1.0 - prob[i]);
    }
    const Vector grad = xa.transpose() * (prob - design.y) + penalty.cwiseProduct(beta);
    if (!grad.allFinite()) throw NumericalError("logistic fit for '" + std::string(target) + "' diverged");
    if (grad.norm() < kTolerance) {
      converged = true;
      break;
    }
    Matrix hessian = xa.transpose() * weight.asDiagonal() * xa;
    hessian.diagonal() += penalty;
    // Tiny ridge keeps the Newton system solvable when the data are separable and l2 = 0.
    hessian.diagonal().array() += 1e-12;
    const Vector step = hessian.ldlt().solve(grad);
    double scale = 1.0;
    Vector next = beta - step;
    double value = objective(next);
    while (!(value <= current) && scale > 1e-10) {
      scale *= 0.5;
      next = beta - scale * step;
      value = objective(next);
    }
    if (!(value <= current)) break;
    beta = std::move(next);
    current = value;
  }
  if (!converged) {
    throw NumericalError("logistic fit for '" + std::string(target) +
                         "' did not reach gradient tolerance (separable data needs l2 > 0)");
  }

  LinearPredictor pred;
  pred.weights = beta.head(p);
  pred.intercept = beta[p];
  pred.kind = PredictorKind::logistic;
  pred.target = std::string(target);
  pred.covariates.assign(covariates.begin(), covariates.end());
  pred.penalty = l2;
  return pred;
}

double affine_value(const LinearPredictor& pred, const Vector& z, std::span<const double> covariate_values) {
  const auto d = pred.latent_dimension();
  if (static_cast<std::size_t>(z.size()) != d) {
    throw ValidationError("predictor '" + pred.target + "' expects a code of length " + std::to_string(d) + ", got " +
                          std::to_string(z.size()));
  }
  if (covariate_values.size() != pred.covariates.size()) {
    throw ValidationError("predictor '" + pred.target + "' expects " + std::to_string(pred.covariates.size()) +
                          " covariate values, got " + std::to_string(covariate_values.size()));
  }
  double value = pred.intercept + pred.latent_block().dot(z);
  for (std::size_t j = 0; j < covariate_values.size(); ++j) {
    value += pred.weights[static_cast<Eigen::Index>(d + j)] * covariate_values[j];
  }
  return value;
}

double predict(const LinearPredictor& pred, const Vector& z, std::span<const double> covariate_values) {
  const double t = affine_value(pred, z, covariate_values);
  return pred.kind == PredictorKind::logistic ? sigmoid(t) : t;
}

Direction extract_direction(const LinearPredictor& pred) {
  std::vector<ProvenanceStep> provenance;
  if (pred.covariates.empty()) {
    provenance.push_back({ProvenanceStep::Kind::base, {}});
  } else {
    provenance.push_back({ProvenanceStep::Kind::conditioned, pred.covariates});
  }
  return Direction::from_raw(pred.target, pred.latent_block(), pred.intercept, std::move(provenance));
}

std::vector<std::string> peer_covariates(const AttributeTable& table, std::string_view target) {
  std::vector<std::string> out;
  for (const auto& a : table.attributes()) {
    if (a.role == AttributeRole::au && a.name != target) out.push_back(a.name);
  }
  return out;
}

DirectionBank fit_direction_bank(const AttributeTable& table, std::span<const std::string> targets,
                                 bool condition_on_peers, double alpha) {
  DirectionBank bank(table.dimension());
  for (const auto& target : targets) {
    const auto covariates = condition_on_peers ? peer_covariates(table, target) : std::vector<std::string>{};
    bank.put(extract_direction(fit_ridge(table, target, covariates, alpha)));
  }
  return bank;
}

std::vector<double> quantile_boundaries(const LinearPredictor& pred, const AttributeTable& table, std::size_t bins) {
  if (bins < 2) throw ValidationError("quantile binning needs at least 2 bins");
  if (!pred.covariates.empty()) throw ValidationError("quantile binning requires a predictor without covariates");
  if (table.rows() == 0) throw ValidationError("quantile binning needs a non-empty table");
  std::vector<double> values(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    values[i] = predict(pred, Vector(table.codes().row(static_cast<Eigen::Index>(i)).transpose()));
  }
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  for (std::size_t q = 1; q < bins; ++q) {
    // Linear interpolation between order statistics.
    const double pos = static_cast<double>(q) / static_cast<double>(bins) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    out.push_back(values[lo] + frac * (values[hi] - values[lo]));
  }
  return out;
}

std::vector<LinearPredictor> fit_attribute_predictors(const AttributeTable& table, std::span<const std::string> names,
                                                      double alpha, double l2) {
  std::vector<LinearPredictor> out;
  for (const auto& name : names) {
    if (table.attribute(name).kind == AttributeKind::binary) {
      out.push_back(fit_logistic(table, name, {}, l2));
    } else {
      auto pred = fit_ridge(table, name, {}, alpha);
      pred.bins = quantile_boundaries(pred, table, 3);
      out.push_back(std::move(pred));
    }
  }
  return out;
}

namespace {

std::string join_or_dash(const std::vector<std::string>& items) {
  if (items.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back(',');
    out += items[i];
  }
  return out;
}

}  // namespace

void save_predictors(std::span<const LinearPredictor> predictors, std::size_t dimension,
                     const std::filesystem::path& path) {
  std::ostringstream out;
  out << "dimension=" << dimension << '\n';
  for (const auto& p : predictors) {
    if (p.latent_dimension() != dimension) throw ValidationError("predictor '" + p.target + "' dimension mismatch");
    std::vector<std::string> bins;
    for (double b : p.bins) bins.push_back(format_real(b));
    out << "predictor " << p.target << " kind=" << to_string(p.kind) << " intercept=" << format_real(p.intercept)
        << " penalty=" << format_real(p.penalty) << " covariates=" << join_or_dash(p.covariates)
        << " bins=" << join_or_dash(bins) << '\n';
    for (Eigen::Index i = 0; i < p.weights.size(); ++i) {
      if (i) out << ' ';
      out << format_real(p.weights[i]);
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<LinearPredictor> load_predictors(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  const std::string source = path.string();
  std::string line;
  std::optional<std::size_t> dimension;
  std::vector<LinearPredictor> out;
  auto field = [&](std::string_view tok, std::string_view key) {
    if (tok.substr(0, key.size()) != key || tok.size() <= key.size() || tok[key.size()] != '=') {
      throw ValidationError(source + ": expected field '" + std::string(key) + "='");
    }
    return tok.substr(key.size() + 1);
  };
  while (std::getline(in, line)) {
    const auto tokens = split_whitespace(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    if (!dimension) {
      const auto d = parse_integer(field(tokens[0], "dimension"), "dimension");
      if (d <= 0) throw ValidationError(source + ": dimension must be positive");
      dimension = static_cast<std::size_t>(d);
      continue;
    }
    if (tokens.size() != 7 || tokens[0] != "predictor") throw ValidationError(source + ": malformed predictor header");
    LinearPredictor p;
    p.target = std::string(tokens[1]);
    const auto kind = field(tokens[2], "kind");
    if (kind == "ridge") {
      p.kind = PredictorKind::ridge;
    } else if (kind == "logistic") {
      p.kind = PredictorKind::logistic;
    } else {
      throw ValidationError(source + ": unknown predictor kind '" + std::string(kind) + "'");
    }
    p.intercept = parse_real(field(tokens[3], "intercept"), "intercept");
    p.penalty = parse_real(field(tokens[4], "penalty"), "penalty");
    const auto cov = field(tokens[5], "covariates");
    if (cov != "-") p.covariates = split_list(cov);
    const auto bins = field(tokens[6], "bins");
    if (bins != "-") {
      for (const auto& b : split_list(bins)) p.bins.push_back(parse_real(b, "bin boundary"));
      if (!std::is_sorted(p.bins.begin(), p.bins.end())) throw ValidationError(source + ": bins must be ordered");
    }
    if (!std::getline(in, line)) throw ValidationError(source + ": missing weights for '" + p.target + "'");
    const auto values = split_whitespace(line);
    if (values.size() != *dimension + p.covariates.size()) {
      throw ValidationError(source + ": predictor '" + p.target + "' has " + std::to_string(values.size()) +
                            " weights, expected " + std::to_string(*dimension + p.covariates.size()));
    }
    p.weights.resize(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) p.weights[static_cast<Eigen::Index>(i)] = parse_real(values[i], p.target);
    out.push_back(std::move(p));
  }
  if (!dimension) throw ValidationError(source + ": missing 'dimension=' header");
  return out;
}

}  // namespace lsedit
