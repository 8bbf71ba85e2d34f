#include "lsedit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lsedit/errors.hpp"
#include "lsedit/table_io.hpp"

namespace lsedit {

std::vector<AttributeMeta> OracleSpec::attributes() const {
  std::vector<AttributeMeta> out;
  for (const auto& f : factors) out.push_back({f.name, f.kind, f.role});
  return out;
}

std::size_t OracleSpec::factor_index(std::string_view name) const {
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].name == name) return i;
  }
  throw ValidationError("oracle has no factor named '" + std::string(name) + "'");
}

void OracleSpec::validate() const {
  const auto k = static_cast<Eigen::Index>(factors.size());
  if (k == 0) throw ValidationError("oracle needs at least one factor");
  if (factor_correlation.rows() != k || factor_correlation.cols() != k) {
    throw ValidationError("oracle factor_correlation must be " + std::to_string(k) + "x" + std::to_string(k));
  }
  if (mixing.cols() != k || mixing.rows() < k) {
    throw ValidationError("oracle mixing must be d x k with d >= k");
  }
  if (!factor_correlation.allFinite() || !mixing.allFinite()) throw ValidationError("oracle spec has non-finite entries");
  if (!(noise_sigma >= 0.0)) throw ValidationError("oracle noise_sigma must be non-negative");
  std::vector<std::string> names;
  for (const auto& f : factors) {
    if (!(f.activation_rate > 0.0 && f.activation_rate <= 1.0)) {
      throw ValidationError("factor '" + f.name + "' activation rate must be in (0, 1]");
    }
    names.push_back(f.name);
  }
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) throw ValidationError("duplicate oracle factor name");
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(factor_correlation(i, i) - 1.0) > 1e-12) throw ValidationError("factor_correlation needs a unit diagonal");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(factor_correlation(i, j) - factor_correlation(j, i)) > 1e-12) {
        throw ValidationError("factor_correlation is not symmetric");
      }
    }
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(factor_correlation);
  if (eig.eigenvalues().minCoeff() < -1e-10) throw ValidationError("factor_correlation is not positive semidefinite");
  const Eigen::ColPivHouseholderQR<Matrix> qr(mixing);
  if (qr.rank() < k) throw ValidationError("oracle mixing columns are linearly dependent");
}

Vector OracleSpec::latent_axis(std::size_t factor) const {
  return mixing.col(static_cast<Eigen::Index>(factor)).normalized();
}

Vector OracleSpec::encode(const Vector& f) const { return mixing * f; }

Matrix OracleSpec::recover_factors(const Matrix& codes) const {
  const Eigen::ColPivHouseholderQR<Matrix> qr(mixing);
  return qr.solve(codes.transpose()).transpose();
}

Matrix random_orthonormal_mixing(std::size_t dimension, std::size_t factors, double scale, std::uint64_t seed) {
  if (factors > dimension) throw ValidationError("mixing needs dimension >= factor count");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix g(static_cast<Eigen::Index>(dimension), static_cast<Eigen::Index>(factors));
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  }
  const Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
  // Fix column signs so the result does not depend on QR sign conventions.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return scale * q;
}

double squash_factor(const OracleFactor& factor, double u) {
  const double p = factor.activation_rate;
  if (factor.kind == AttributeKind::binary) return u > 1.0 - p ? 1.0 : 0.0;
  return std::clamp((u - (1.0 - p)) / p, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Config

OracleSpec oracle_spec_from_config(const KeyValueConfig& cfg, std::string_view prefix) {
  const std::string p(prefix);
  OracleSpec spec;
  const auto d = cfg.get_count(p + "dimension", 0);
  if (d == 0) throw ValidationError("oracle config: key '" + p + "dimension' must be a positive integer");
  spec.noise_sigma = cfg.get_real(p + "noise_sigma", 0.0);
  for (const auto& name : cfg.get_list(p + "factors")) {
    OracleFactor f;
    f.name = name;
    f.role = parse_role(cfg.get_string(p + "factor." + name + ".role", "AU"));
    f.kind = parse_kind(cfg.get_string(p + "factor." + name + ".kind", "continuous"));
    f.activation_rate = cfg.get_real(p + "factor." + name + ".rate", 1.0);
    spec.factors.push_back(std::move(f));
  }
  const auto k = spec.factors.size();
  spec.factor_correlation = Matrix::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const auto key = p + "correlation." + spec.factors[i].name + "." + spec.factors[j].name;
      if (cfg.has(key)) {
        const double rho = cfg.get_real(key);
        spec.factor_correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rho;
        spec.factor_correlation(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rho;
      }
    }
  }
  if (cfg.has(p + "mixing.row.0")) {
    spec.mixing.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < d; ++i) {
      const auto row = cfg.get_real_list(p + "mixing.row." + std::to_string(i));
      if (row.size() != k) throw ValidationError("oracle config: mixing.row." + std::to_string(i) + " needs " + std::to_string(k) + " values");
      for (std::size_t j = 0; j < k; ++j) spec.mixing(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  } else {
    spec.mixing = random_orthonormal_mixing(d, k, cfg.get_real(p + "mixing.scale", 1.0),
                                            static_cast<std::uint64_t>(cfg.get_integer(p + "mixing.seed", 0)));
  }
  if (cfg.has(p + "observation.widths")) {
    spec.observation.widths.clear();
    for (const auto& w : cfg.get_list(p + "observation.widths")) {
      const auto v = parse_integer(w, "observation.widths");
      if (v <= 0) throw ValidationError("oracle config: observation widths must be positive");
      spec.observation.widths.push_back(static_cast<std::size_t>(v));
    }
  }
  spec.observation.seed = static_cast<std::uint64_t>(cfg.get_integer(p + "observation.seed", 1));
  spec.observation.gain = cfg.get_real(p + "observation.gain", 2.0);
  spec.validate();
  return spec;
}

OracleSpec load_oracle_spec(const std::filesystem::path& path) {
  const auto cfg = KeyValueConfig::load(path);
  auto spec = oracle_spec_from_config(cfg);
  cfg.reject_unused("oracle spec '" + path.string() + "'");
  return spec;
}

std::string format_oracle_spec(const OracleSpec& spec) {
  std::ostringstream out;
  out << "dimension=" << spec.dimension() << '\n';
  out << "noise_sigma=" << format_real(spec.noise_sigma) << '\n';
  out << "factors=";
  for (std::size_t i = 0; i < spec.factors.size(); ++i) out << (i ? "," : "") << spec.factors[i].name;
  out << '\n';
  for (const auto& f : spec.factors) {
    out << "factor." << f.name << ".role=" << to_string(f.role) << '\n';
    out << "factor." << f.name << ".kind=" << to_string(f.kind) << '\n';
    out << "factor." << f.name << ".rate=" << format_real(f.activation_rate) << '\n';
  }
  for (std::size_t i = 0; i < spec.factors.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.factors.size(); ++j) {
      const double rho = spec.factor_correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (rho != 0.0) out << "correlation." << spec.factors[i].name << '.' << spec.factors[j].name << '=' << format_real(rho) << '\n';
    }
  }
  for (Eigen::Index i = 0; i < spec.mixing.rows(); ++i) {
    out << "mixing.row." << i << '=';
    for (Eigen::Index j = 0; j < spec.mixing.cols(); ++j) out << (j ? "," : "") << format_real(spec.mixing(i, j));
    out << '\n';
  }
  out << "observation.widths=";
  for (std::size_t i = 0; i < spec.observation.widths.size(); ++i) out << (i ? "," : "") << spec.observation.widths[i];
  out << '\n';
  out << "observation.seed=" << spec.observation.seed << '\n';
  out << "observation.gain=" << format_real(spec.observation.gain) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Sampling

OracleStream::OracleStream(const OracleSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
  spec_.validate();
  // Symmetric square root handles semidefinite correlations where Cholesky fails.
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(spec_.factor_correlation);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  copula_root_ = eig.eigenvectors() * root.asDiagonal();
}

void OracleStream::draw(Vector& factors, LatentCode& code) {
  const auto k = static_cast<Eigen::Index>(spec_.factor_count());
  const auto d = static_cast<Eigen::Index>(spec_.dimension());
  Vector eps(k);
  for (Eigen::Index i = 0; i < k; ++i) eps[i] = normal_(rng_);
  const Vector g = copula_root_ * eps;
  factors.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double u = 0.5 * std::erfc(-g[i] / std::sqrt(2.0));
    factors[i] = squash_factor(spec_.factors[static_cast<std::size_t>(i)], u);
  }
  Vector z = spec_.mixing * factors;
  for (Eigen::Index i = 0; i < d; ++i) z[i] += spec_.noise_sigma * normal_(rng_);
  std::uint64_t raw = rng_();
  StochasticTag tag(8);
  for (auto& byte : tag) {
    byte = static_cast<std::uint8_t>(raw & 0xFF);
    raw >>= 8;
  }
  code = LatentCode(std::move(z), std::move(tag));
}

AttributeTable oracle_sample(const OracleSpec& spec, std::size_t n, std::uint64_t seed) {
  OracleStream stream(spec, seed);
  AttributeTable::Builder builder(spec.dimension(), spec.attributes());
  Vector f;
  LatentCode code;
  for (std::size_t i = 0; i < n; ++i) {
    stream.draw(f, code);
    builder.add(code, f);
  }
  return builder.build();
}

ObservationMap::ObservationMap(std::size_t dimension, const ObservationMapSpec& spec) {
  if (spec.widths.size() != 2) throw ValidationError("observation map needs exactly two widths");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  auto fill = [&](Matrix& w, Vector& b, Eigen::Index out, Eigen::Index in) {
    w.resize(out, in);
    b.resize(out);
    const double s = spec.gain / std::sqrt(static_cast<double>(in));
    for (Eigen::Index j = 0; j < in; ++j) {
      for (Eigen::Index i = 0; i < out; ++i) w(i, j) = s * normal(rng);
    }
    for (Eigen::Index i = 0; i < out; ++i) b[i] = 0.1 * normal(rng);
  };
  fill(w1_, b1_, static_cast<Eigen::Index>(spec.widths[0]), static_cast<Eigen::Index>(dimension));
  fill(w2_, b2_, static_cast<Eigen::Index>(spec.widths[1]), static_cast<Eigen::Index>(spec.widths[0]));
}

Matrix ObservationMap::observe(const Matrix& codes) const {
  if (codes.cols() != w1_.cols()) throw ValidationError("observation map: code dimension mismatch");
  const Matrix h = ((codes * w1_.transpose()).rowwise() + b1_.transpose()).array().tanh().matrix();
  return ((h * w2_.transpose()).rowwise() + b2_.transpose()).array().tanh().matrix();
}

}  // namespace lsedit
