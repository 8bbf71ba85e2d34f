#include "lsedit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "lsedit/errors.hpp"
#include "lsedit/table_io.hpp"

namespace lsedit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_same_shape(const Matrix& a, const Matrix& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
  }
}

std::string cell(double v) { return std::isnan(v) ? "NA" : format_real(v); }

void write_matrix(std::ostringstream& out, const Matrix& m, std::span<const std::string> names) {
  out << "table\nattribute";
  for (const auto& n : names) out << '\t' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << '\t' << cell(m(i, j));
    out << '\n';
  }
}

void check_names(std::span<const std::string> names, Eigen::Index m) {
  if (static_cast<Eigen::Index>(names.size()) != m) throw ValidationError("report: name count does not match columns");
}

}  // namespace

Matrix binarize(const Matrix& values, double threshold) {
  return (values.array() >= threshold).cast<double>().matrix();
}

F1Report f1_scores(const Matrix& predictions, const Matrix& truth, double threshold) {
  check_same_shape(predictions, truth, "f1");
  F1Report r;
  const Matrix p = binarize(predictions, threshold);
  const Matrix t = binarize(truth, threshold);
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    const double tp = (p.col(j).array() * t.col(j).array()).sum();
    const double fp = (p.col(j).array() * (1.0 - t.col(j).array())).sum();
    const double fn = ((1.0 - p.col(j).array()) * t.col(j).array()).sum();
    const bool vacuous = tp + fp + fn == 0.0;
    r.f1.push_back(vacuous ? 1.0 : 2.0 * tp / (2.0 * tp + fp + fn));
    r.vacuous.push_back(vacuous);
  }
  if (!r.f1.empty()) {
    double s = 0.0;
    for (double v : r.f1) s += v;
    r.macro = s / static_cast<double>(r.f1.size());
  }
  return r;
}

CorrelationReport correlation_matrix(const Matrix& values) {
  if (values.rows() < 2) throw ValidationError("correlation needs at least 2 rows");
  const auto m = values.cols();
  const Matrix centered = values.rowwise() - values.colwise().mean();
  const Vector norms = centered.colwise().norm().transpose();
  CorrelationReport r;
  r.matrix = Matrix::Constant(m, m, kNaN);
  r.valid = Mask::Constant(m, m, false);
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (norms[i] == 0.0 || norms[j] == 0.0) continue;
      const double c = i == j ? 1.0 : std::clamp(centered.col(i).dot(centered.col(j)) / (norms[i] * norms[j]), -1.0, 1.0);
      r.matrix(i, j) = c;
      r.valid(i, j) = true;
      if (i != j) {
        total += std::abs(c);
        ++r.offdiag_count;
      }
    }
  }
  r.mean_abs_offdiag = r.offdiag_count ? total / static_cast<double>(r.offdiag_count) : kNaN;
  return r;
}

PairFprReport pair_fpr(const Matrix& predicted, const Matrix& truth) {
  check_same_shape(predicted, truth, "pair-fpr");
  auto is_binary = [](const Matrix& x) { return ((x.array() == 0.0) || (x.array() == 1.0)).all(); };
  if (!is_binary(predicted) || !is_binary(truth)) throw ValidationError("pair-fpr expects 0/1 inputs");
  const auto m = truth.cols();
  const Matrix absent = (1.0 - truth.array()).matrix();
  // support(i, j) = #rows with truth i = 0 and truth j = 1
  const Matrix support = absent.transpose() * truth;
  const Matrix false_pos = (predicted.array() * absent.array()).matrix().transpose() * truth;
  PairFprReport r;
  r.fpr = Matrix::Constant(m, m, kNaN);
  r.support.resize(m, m);
  r.valid = Mask::Constant(m, m, false);
  double total = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      r.support(i, j) = static_cast<std::size_t>(std::llround(support(i, j)));
      if (i == j || r.support(i, j) == 0) continue;
      r.fpr(i, j) = false_pos(i, j) / support(i, j);
      r.valid(i, j) = true;
      total += r.fpr(i, j);
      ++count;
    }
  }
  r.mean = count ? total / static_cast<double>(count) : kNaN;
  return r;
}

MaeReport mae_to_target(const Matrix& pred_on_edit, const Matrix& pred_on_target,
                        std::span<const std::size_t> edited_counts) {
  check_same_shape(pred_on_edit, pred_on_target, "mae");
  if (static_cast<Eigen::Index>(edited_counts.size()) != pred_on_edit.rows()) {
    throw ValidationError("mae: " + std::to_string(edited_counts.size()) + " edit counts for " +
                          std::to_string(pred_on_edit.rows()) + " rows");
  }
  if (pred_on_edit.cols() == 0) throw ValidationError("mae: no attribute columns");
  const Vector per_row = (pred_on_edit - pred_on_target).cwiseAbs().rowwise().mean();
  auto summarize = [](const std::vector<double>& xs) {
    MaeGroup g;
    g.rows = xs.size();
    if (xs.empty()) return g;
    double s = 0.0;
    for (double x : xs) s += x;
    g.mae = s / static_cast<double>(xs.size());
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - g.mae) * (x - g.mae);
      g.standard_error = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
    }
    return g;
  };
  std::map<std::size_t, std::vector<double>> groups;
  std::vector<double> all;
  for (Eigen::Index i = 0; i < per_row.size(); ++i) {
    groups[edited_counts[static_cast<std::size_t>(i)]].push_back(per_row[i]);
    all.push_back(per_row[i]);
  }
  MaeReport r;
  for (const auto& [k, xs] : groups) r.by_edit_count[k] = summarize(xs);
  r.overall = summarize(all);
  return r;
}

double Pow3Fit::operator()(double n) const { return a - b * std::pow(n, -c); }

Pow3Fit fit_pow3_fixed_exponent(std::span<const LearningPoint> points, double c) {
  const auto k = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += std::pow(p.n, -c);
    my += p.score;
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = std::pow(p.n, -c) - mx;
    sxx += dx * dx;
    sxy += dx * (p.score - my);
  }
  Pow3Fit fit;
  fit.c = c;
  fit.b = sxx > 0.0 ? -sxy / sxx : 0.0;
  fit.a = my + fit.b * mx;
  for (const auto& p : points) {
    const double e = fit(p.n) - p.score;
    fit.residual += e * e;
  }
  return fit;
}

Pow3Fit fit_pow3(std::span<const LearningPoint> points) {
  if (points.size() < 3) throw ValidationError("pow3 fit needs at least 3 points");
  std::set<double> distinct;
  for (const auto& p : points) {
    if (!(p.n > 0.0) || !std::isfinite(p.n)) throw ValidationError("pow3 fit: sample sizes must be positive");
    if (!std::isfinite(p.score)) throw ValidationError("pow3 fit: non-finite score");
    distinct.insert(p.n);
  }
  if (distinct.size() < 3) throw ValidationError("pow3 fit needs at least 3 distinct sample sizes");

  double lo = points[0].score, hi = points[0].score, mean = 0.0;
  for (const auto& p : points) {
    lo = std::min(lo, p.score);
    hi = std::max(hi, p.score);
    mean += p.score;
  }
  mean /= static_cast<double>(points.size());
  if (hi - lo <= 1e-12 * std::max(1.0, std::abs(mean))) {
    Pow3Fit fit;
    fit.a = mean;
    fit.degenerate = true;
    for (const auto& p : points) fit.residual += (p.score - mean) * (p.score - mean);
    return fit;
  }

  Pow3Fit best;
  best.residual = std::numeric_limits<double>::infinity();
  const auto steps = static_cast<int>(std::lround((kPow3MaxExponent - kPow3MinExponent) / kPow3GridStep));
  for (int i = 0; i <= steps; ++i) {
    const auto cand = fit_pow3_fixed_exponent(points, kPow3MinExponent + i * kPow3GridStep);
    if (cand.residual < best.residual) best = cand;
  }
  const double left = std::max(kPow3MinExponent, best.c - kPow3GridStep);
  const double right = std::min(kPow3MaxExponent, best.c + kPow3GridStep);
  auto objective = [&](double c) { return fit_pow3_fixed_exponent(points, c).residual; };
  const auto refined = boost::math::tools::brent_find_minima(objective, left, right, std::numeric_limits<double>::digits);
  const auto candidate = fit_pow3_fixed_exponent(points, refined.first);
  if (candidate.residual <= best.residual) best = candidate;
  return best;
}

double solve_pow3(const Pow3Fit& fit, double score) {
  if (fit.degenerate || !(fit.b > 0.0)) {
    throw ValidationError("learning curve does not improve with n (b = " + format_real(fit.b) + ")");
  }
  if (!(score < fit.a)) {
    throw ValidationError("score " + format_real(score) + " is unreachable: curve asymptote a = " + format_real(fit.a));
  }
  return std::pow(fit.b / (fit.a - score), 1.0 / fit.c);
}

double data_multiplier(const Pow3Fit& fit, double reference_score, double n_current) {
  if (!(n_current > 0.0)) throw ValidationError("data multiplier needs a positive current sample size");
  return solve_pow3(fit, reference_score) / n_current;
}

std::string format_f1_report(const F1Report& report, std::span<const std::string> names, double threshold) {
  check_names(names, static_cast<Eigen::Index>(report.f1.size()));
  std::ostringstream out;
  out << "report=f1\nthreshold=" << format_real(threshold) << "\nmacro_f1=" << format_real(report.macro) << '\n';
  out << "table\nattribute\tf1\tvacuous\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i] << '\t' << format_real(report.f1[i]) << '\t' << (report.vacuous[i] ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string format_correlation_report(const CorrelationReport& report, std::span<const std::string> names) {
  check_names(names, report.matrix.cols());
  std::ostringstream out;
  out << "report=correlation\nmean_abs_offdiag=" << cell(report.mean_abs_offdiag)
      << "\noffdiag_count=" << report.offdiag_count << '\n';
  write_matrix(out, report.matrix, names);
  return out.str();
}

std::string format_pair_fpr_report(const PairFprReport& report, std::span<const std::string> names) {
  check_names(names, report.fpr.cols());
  std::ostringstream out;
  out << "report=pair_fpr\nmean_pair_fpr=" << cell(report.mean) << '\n';
  write_matrix(out, report.fpr, names);
  out << "support\nattribute";
  for (const auto& n : names) out << '\t' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < report.support.rows(); ++i) {
    out << names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < report.support.cols(); ++j) out << '\t' << report.support(i, j);
    out << '\n';
  }
  return out.str();
}

std::string format_mae_report(const MaeReport& report) {
  std::ostringstream out;
  out << "report=mae\nrows=" << report.overall.rows << "\nmae=" << format_real(report.overall.mae)
      << "\nstandard_error=" << format_real(report.overall.standard_error) << '\n';
  out << "table\nedited_aus\trows\tmae\tstandard_error\n";
  for (const auto& [k, g] : report.by_edit_count) {
    out << k << '\t' << g.rows << '\t' << format_real(g.mae) << '\t' << format_real(g.standard_error) << '\n';
  }
  return out.str();
}

std::string format_pow3_report(const Pow3Fit& fit, std::span<const LearningPoint> points) {
  std::ostringstream out;
  out << "report=learning_curve\nmodel=a-b*n^-c\na=" << format_real(fit.a) << "\nb=" << format_real(fit.b)
      << "\nc=" << format_real(fit.c) << "\nresidual=" << format_real(fit.residual)
      << "\ndegenerate=" << (fit.degenerate ? 1 : 0) << '\n';
  out << "table\nn\tscore\tfitted\n";
  for (const auto& p : points) out << format_real(p.n) << '\t' << format_real(p.score) << '\t' << format_real(fit(p.n)) << '\n';
  return out.str();
}

}  // namespace lsedit
