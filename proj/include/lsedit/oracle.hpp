#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lsedit/config.hpp"
#include "lsedit/core.hpp"

namespace lsedit {

// One ground-truth factor of the synthetic generator. `activation_rate` is
// the probability that the factor is non-zero (continuous) or 1 (binary).
struct OracleFactor {
  std::string name;
  AttributeRole role = AttributeRole::au;
  AttributeKind kind = AttributeKind::continuous;
  double activation_rate = 1.0;
};

struct ObservationMapSpec {
  std::vector<std::size_t> widths{64, 48};
  std::uint64_t seed = 1;
  double gain = 2.0;
};

// Synthetic ground-truth generator:
//   g ~ N(0, factor_correlation)               (Gaussian copula)
//   u = Phi(g)
//   f = clamp((u - (1 - rate)) / rate, 0, 1)   continuous factors
//   f = [u > 1 - rate]                         binary factors
//   z = mixing f + noise_sigma * eps
// Labels are the factors themselves.
struct OracleSpec {
  std::vector<OracleFactor> factors;
  Matrix factor_correlation;  // k x k, symmetric PSD, unit diagonal
  Matrix mixing;              // d x k, rank k
  double noise_sigma = 0.0;
  ObservationMapSpec observation;

  std::size_t factor_count() const { return factors.size(); }
  std::size_t dimension() const { return static_cast<std::size_t>(mixing.rows()); }
  std::vector<AttributeMeta> attributes() const;
  std::size_t factor_index(std::string_view name) const;

  // Throws ValidationError for non-PSD correlation or rank-deficient mixing.
  void validate() const;

  // Unit latent-space axis of a factor: its normalized mixing column.
  Vector latent_axis(std::size_t factor) const;
  // Noise-free code for a factor vector.
  Vector encode(const Vector& factors) const;
  // Least-squares factor estimates (mixing pseudo-inverse), codes as rows.
  Matrix recover_factors(const Matrix& codes) const;
};

// Random mixing with orthonormal columns scaled by `scale` (Householder QR of
// a Gaussian matrix).
Matrix random_orthonormal_mixing(std::size_t dimension, std::size_t factors, double scale, std::uint64_t seed);

// Config keys: dimension, noise_sigma, factors (comma list), factor.<name>.role,
// factor.<name>.kind, factor.<name>.rate, correlation.<a>.<b>, mixing.seed,
// mixing.scale, mixing.row.<i> (explicit rows, overrides the random mixing),
// observation.widths, observation.seed, observation.gain.
OracleSpec oracle_spec_from_config(const KeyValueConfig& config, std::string_view prefix = "");
OracleSpec load_oracle_spec(const std::filesystem::path& path);
std::string format_oracle_spec(const OracleSpec& spec);

// Sequential row generator; oracle_sample(spec, n, seed) equals the first n draws.
class OracleStream {
 public:
  OracleStream(const OracleSpec& spec, std::uint64_t seed);
  // Draws one row: factors (labels) and the noisy code with an 8-byte tag.
  void draw(Vector& factors, LatentCode& code);
  const OracleSpec& spec() const { return spec_; }

 private:
  OracleSpec spec_;
  Matrix copula_root_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

AttributeTable oracle_sample(const OracleSpec& spec, std::size_t n, std::uint64_t seed);

// Squashes a copula value u in (0,1) into a factor value.
double squash_factor(const OracleFactor& factor, double u);

// Fixed random two-layer tanh network z -> x.
class ObservationMap {
 public:
  ObservationMap(std::size_t dimension, const ObservationMapSpec& spec);
  explicit ObservationMap(const OracleSpec& spec) : ObservationMap(spec.dimension(), spec.observation) {}
  // Codes as rows in, observations as rows out.
  Matrix observe(const Matrix& codes) const;
  std::size_t output_dimension() const { return static_cast<std::size_t>(w2_.rows()); }

 private:
  Matrix w1_, w2_;
  Vector b1_, b2_;
};

}  // namespace lsedit
