#include "lsedit/geometry.hpp"

#include "lsedit/errors.hpp"

namespace lsedit {

NuisanceBasis orthonormalize(std::span<const Direction> directions, std::size_t dimension, double tol) {
  if (!(tol > 0.0)) throw ValidationError("orthonormalize: tolerance must be positive");
  NuisanceBasis out;
  out.dimension = dimension;
  for (const auto& dir : directions) {
    if (dir.dimension() != dimension) {
      throw ValidationError("orthonormalize: direction '" + dir.name() + "' has length " +
                            std::to_string(dir.dimension()) + ", expected " + std::to_string(dimension));
    }
    out.source_names.push_back(dir.name());
    Vector v = dir.unit();
    // Modified Gram-Schmidt: subtract each component from the running residual.
    for (const auto& b : out.basis) v -= v.dot(b) * b;
    const double norm = v.norm();
    if (norm < tol) {
      out.dropped.push_back(dir.name());
      continue;
    }
    out.basis.push_back(v / norm);
  }
  return out;
}

namespace {

Vector residual(const Direction& dir, const NuisanceBasis& basis) {
  if (dir.dimension() != basis.dimension) {
    throw ValidationError("project_out: direction '" + dir.name() + "' has length " + std::to_string(dir.dimension()) +
                          ", basis dimension is " + std::to_string(basis.dimension));
  }
  Vector w = dir.unit();
  for (const auto& b : basis.basis) w -= w.dot(b) * b;
  return w;
}

}  // namespace

double residual_norm(const Direction& dir, const NuisanceBasis& basis) { return residual(dir, basis).norm(); }

Direction project_out(const Direction& dir, const NuisanceBasis& basis) {
  Vector w = residual(dir, basis);
  auto provenance = dir.provenance();
  provenance.push_back({ProvenanceStep::Kind::projected, basis.source_names});
  const double norm = w.norm();
  if (dir.degenerate() || norm < kDegenerateResidual) {
    return Direction::from_parts(dir.name(), Vector::Zero(w.size()), 0.0, dir.intercept(), std::move(provenance), true);
  }
  // Exact identity when nothing was removed.
  if (w == dir.unit()) {
    return Direction::from_parts(dir.name(), dir.unit(), dir.calibration(), dir.intercept(), std::move(provenance), false);
  }
  Vector unit = w / norm;
  // A second pass cleans up the rounding left by the first.
  for (const auto& b : basis.basis) unit -= unit.dot(b) * b;
  unit.normalize();
  return Direction::from_parts(dir.name(), std::move(unit), dir.calibration() * norm, dir.intercept(),
                               std::move(provenance), false);
}

}  // namespace lsedit
