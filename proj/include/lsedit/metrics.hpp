#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lsedit/core.hpp"

namespace lsedit {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// values >= threshold -> 1, else 0.
Matrix binarize(const Matrix& values, double threshold);

struct F1Report {
  std::vector<double> f1;
  // Attribute with no positives in truth and none predicted: F1 set to 1.
  std::vector<bool> vacuous;
  double macro = 0.0;
};

F1Report f1_scores(const Matrix& predictions, const Matrix& truth, double threshold = 0.1);

struct CorrelationReport {
  Matrix matrix;  // NaN where masked
  Mask valid;     // false for entries touching a zero-variance column
  double mean_abs_offdiag = 0.0;  // over valid off-diagonal entries; NaN if none
  std::size_t offdiag_count = 0;
};

CorrelationReport correlation_matrix(const Matrix& values);

struct PairFprReport {
  Matrix fpr;  // (i, j): P(pred i = 1 | truth i = 0, truth j = 1); NaN where masked
  Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic> support;
  Mask valid;  // support > 0 and i != j
  double mean = 0.0;  // over valid entries; NaN if none
};

// Inputs must be 0/1 matrices of equal shape.
PairFprReport pair_fpr(const Matrix& predicted, const Matrix& truth);

struct MaeGroup {
  std::size_t rows = 0;
  double mae = 0.0;
  double standard_error = 0.0;  // sample sd / sqrt(rows); 0 for a single row
};

struct MaeReport {
  std::map<std::size_t, MaeGroup> by_edit_count;
  MaeGroup overall;
};

// Per-row mean absolute difference, grouped by the number of edited AUs.
MaeReport mae_to_target(const Matrix& pred_on_edit, const Matrix& pred_on_target,
                        std::span<const std::size_t> edited_counts);

struct LearningPoint {
  double n = 0.0;
  double score = 0.0;
};

// f(n) = a - b n^(-c).
struct Pow3Fit {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  double residual = 0.0;  // sum of squared errors
  bool degenerate = false;  // constant scores: b = 0

  double operator()(double n) const;
};

inline constexpr double kPow3MinExponent = 0.05;
inline constexpr double kPow3MaxExponent = 2.0;
inline constexpr double kPow3GridStep = 0.005;

// Grid search over c with closed-form least-squares (a, b) per c, then Brent
// refinement around the best grid exponent, kept only if it lowers the residual.
Pow3Fit fit_pow3(std::span<const LearningPoint> points);
// Sum of squared errors of the best (a, b) for a fixed exponent.
Pow3Fit fit_pow3_fixed_exponent(std::span<const LearningPoint> points, double c);

// n with f(n) = score. Throws ValidationError when score >= a or b <= 0.
double solve_pow3(const Pow3Fit& fit, double score);
// n* / n_current where f(n*) = reference_score.
double data_multiplier(const Pow3Fit& fit, double reference_score, double n_current);

// Report rendering: `key=value` header lines, a `table` line, then a
// tab-separated matrix with a header row. Masked entries print as NA.
std::string format_f1_report(const F1Report& report, std::span<const std::string> names, double threshold);
std::string format_correlation_report(const CorrelationReport& report, std::span<const std::string> names);
std::string format_pair_fpr_report(const PairFprReport& report, std::span<const std::string> names);
std::string format_mae_report(const MaeReport& report);
std::string format_pow3_report(const Pow3Fit& fit, std::span<const LearningPoint> points);

}  // namespace lsedit
