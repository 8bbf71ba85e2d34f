#pragma once

#include <span>
#include <string>
#include <vector>

#include "lsedit/core.hpp"

namespace lsedit {

// Orthonormal basis of the span of a set of nuisance/competing directions.
struct NuisanceBasis {
  std::size_t dimension = 0;
  std::vector<std::string> source_names;  // every input, in order
  std::vector<Vector> basis;              // mutually orthonormal
  std::vector<std::string> dropped;       // inputs linearly dependent on earlier ones
};

inline constexpr double kDropTolerance = 1e-8;
inline constexpr double kDegenerateResidual = 1e-8;

// Modified Gram-Schmidt over the unit vectors, in order. A vector whose
// residual norm falls below `tol` is dropped and recorded.
NuisanceBasis orthonormalize(std::span<const Direction> directions, std::size_t dimension, double tol = kDropTolerance);

// Removes the component of `dir` inside span(basis) and renormalizes.
// Calibration is scaled by the residual norm; provenance gains a
// projected(...) step. A residual below 1e-8 marks the result degenerate.
Direction project_out(const Direction& dir, const NuisanceBasis& basis);

// Norm of the residual of the unit vector after projection.
double residual_norm(const Direction& dir, const NuisanceBasis& basis);

}  // namespace lsedit
