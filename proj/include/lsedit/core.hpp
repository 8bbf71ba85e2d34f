#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace lsedit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Opaque per-sample payload carried next to the semantic code (the generator's
// stochastic code). Never interpreted numerically.
using StochasticTag = std::vector<std::uint8_t>;

struct LatentCode {
  Vector z;
  std::optional<StochasticTag> tag;

  LatentCode() = default;
  explicit LatentCode(Vector values, std::optional<StochasticTag> t = std::nullopt);

  std::size_t dimension() const { return static_cast<std::size_t>(z.size()); }
};

enum class AttributeKind { continuous, binary };
enum class AttributeRole { au, demographic, nuisance };

std::string_view to_string(AttributeKind kind);
std::string_view to_string(AttributeRole role);
AttributeKind parse_kind(std::string_view text);
AttributeRole parse_role(std::string_view text);

struct AttributeMeta {
  std::string name;
  AttributeKind kind = AttributeKind::continuous;
  AttributeRole role = AttributeRole::au;

  bool operator==(const AttributeMeta&) const = default;
};

// n x d codes aligned with n x m labels. Validated on construction and
// immutable afterwards.
class AttributeTable {
 public:
  class Builder;

  AttributeTable(std::size_t dimension, std::vector<AttributeMeta> attributes);
  AttributeTable(Matrix codes, Matrix labels, std::vector<AttributeMeta> attributes,
                 std::vector<std::optional<StochasticTag>> tags = {});

  std::size_t rows() const { return static_cast<std::size_t>(codes_.rows()); }
  std::size_t dimension() const { return dimension_; }
  std::size_t attribute_count() const { return attributes_.size(); }

  const Matrix& codes() const { return codes_; }
  const Matrix& labels() const { return labels_; }
  const std::vector<AttributeMeta>& attributes() const { return attributes_; }
  const std::vector<std::optional<StochasticTag>>& tags() const { return tags_; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws ValidationError naming the attribute when absent.
  std::size_t index_of(std::string_view name) const;
  const AttributeMeta& attribute(std::string_view name) const;
  std::vector<std::size_t> indices_with_role(AttributeRole role) const;
  std::vector<std::string> names_with_role(AttributeRole role) const;

  LatentCode code(std::size_t row) const;
  Vector label_row(std::size_t row) const { return labels_.row(static_cast<Eigen::Index>(row)).transpose(); }
  Vector column(std::string_view name) const;

  AttributeTable select_rows(std::span<const std::size_t> rows) const;
  // Keeps only the named label columns, in the given order.
  AttributeTable select_attributes(std::span<const std::string> names) const;

  bool operator==(const AttributeTable& other) const;

 private:
  void validate() const;

  std::size_t dimension_ = 0;
  Matrix codes_;
  Matrix labels_;
  std::vector<AttributeMeta> attributes_;
  std::vector<std::optional<StochasticTag>> tags_;
};

class AttributeTable::Builder {
 public:
  Builder(std::size_t dimension, std::vector<AttributeMeta> attributes);

  Builder& add(const LatentCode& code, const Vector& labels);
  Builder& add(const Vector& z, const Vector& labels, std::optional<StochasticTag> tag = std::nullopt);
  std::size_t rows() const { return tags_.size(); }
  AttributeTable build() const;

 private:
  std::size_t dimension_;
  std::vector<AttributeMeta> attributes_;
  std::vector<double> codes_;
  std::vector<double> labels_;
  std::vector<std::optional<StochasticTag>> tags_;
};

// Concatenates tables that share dimension and attribute metadata.
AttributeTable concat(std::span<const AttributeTable> tables);

struct ProvenanceStep {
  enum class Kind { base, conditioned, projected };
  Kind kind = Kind::base;
  std::vector<std::string> names;

  bool operator==(const ProvenanceStep&) const = default;
};

std::string format_provenance(std::span<const ProvenanceStep> steps);
std::vector<ProvenanceStep> parse_provenance(std::string_view text);

// Unit-norm edit vector. `calibration` is the norm of the raw fitted weight
// block, i.e. predictor-output change per unit of latent displacement along
// the unit vector.
class Direction {
 public:
  Direction() = default;

  // Normalizes `raw`; a zero (or non-finite) vector yields a degenerate direction.
  static Direction from_raw(std::string name, const Vector& raw, double intercept,
                            std::vector<ProvenanceStep> provenance);
  // Rebuilds a direction from stored parts; validates the unit norm.
  static Direction from_parts(std::string name, Vector unit, double calibration, double intercept,
                              std::vector<ProvenanceStep> provenance, bool degenerate);

  const std::string& name() const { return name_; }
  const Vector& unit() const { return unit_; }
  double calibration() const { return calibration_; }
  double intercept() const { return intercept_; }
  const std::vector<ProvenanceStep>& provenance() const { return provenance_; }
  bool degenerate() const { return degenerate_; }
  std::size_t dimension() const { return static_cast<std::size_t>(unit_.size()); }

  bool operator==(const Direction& other) const;

 private:
  std::string name_;
  Vector unit_;
  double calibration_ = 0.0;
  double intercept_ = 0.0;
  std::vector<ProvenanceStep> provenance_;
  bool degenerate_ = true;
};

class DirectionBank {
 public:
  explicit DirectionBank(std::size_t dimension = 0) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return directions_.size(); }
  bool empty() const { return directions_.empty(); }
  bool contains(std::string_view name) const;

  // Inserts or replaces.
  void put(Direction direction);
  const Direction& get(std::string_view name) const;
  const std::map<std::string, Direction, std::less<>>& directions() const { return directions_; }

  bool operator==(const DirectionBank&) const = default;

 private:
  std::size_t dimension_;
  std::map<std::string, Direction, std::less<>> directions_;
};

// Base64 (RFC 4648, padded) used for stochastic tags in text files.
std::string base64_encode(std::span<const std::uint8_t> bytes);
StochasticTag base64_decode(std::string_view text);

}  // namespace lsedit
