#include "lsedit/core.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "lsedit/errors.hpp"

namespace lsedit {

LatentCode::LatentCode(Vector values, std::optional<StochasticTag> t) : z(std::move(values)), tag(std::move(t)) {
  if (!z.allFinite()) throw ValidationError("latent code contains non-finite entries");
}

std::string_view to_string(AttributeKind kind) {
  return kind == AttributeKind::continuous ? "continuous" : "binary";
}

std::string_view to_string(AttributeRole role) {
  switch (role) {
    case AttributeRole::au: return "AU";
    case AttributeRole::demographic: return "demographic";
    case AttributeRole::nuisance: return "nuisance";
  }
  return "?";
}

AttributeKind parse_kind(std::string_view text) {
  if (text == "continuous") return AttributeKind::continuous;
  if (text == "binary") return AttributeKind::binary;
  throw ValidationError("unknown attribute kind '" + std::string(text) + "'");
}

AttributeRole parse_role(std::string_view text) {
  if (text == "AU") return AttributeRole::au;
  if (text == "demographic") return AttributeRole::demographic;
  if (text == "nuisance") return AttributeRole::nuisance;
  throw ValidationError("unknown attribute role '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// AttributeTable

AttributeTable::AttributeTable(std::size_t dimension, std::vector<AttributeMeta> attributes)
    : dimension_(dimension),
      codes_(0, static_cast<Eigen::Index>(dimension)),
      labels_(0, static_cast<Eigen::Index>(attributes.size())),
      attributes_(std::move(attributes)) {
  validate();
}

AttributeTable::AttributeTable(Matrix codes, Matrix labels, std::vector<AttributeMeta> attributes,
                               std::vector<std::optional<StochasticTag>> tags)
    : dimension_(static_cast<std::size_t>(codes.cols())),
      codes_(std::move(codes)),
      labels_(std::move(labels)),
      attributes_(std::move(attributes)),
      tags_(std::move(tags)) {
  if (tags_.empty()) tags_.resize(rows());
  validate();
}

void AttributeTable::validate() const {
  if (dimension_ == 0) throw ValidationError("table dimension must be positive");
  if (codes_.rows() != labels_.rows()) {
    throw ValidationError("codes and labels have different row counts");
  }
  if (static_cast<std::size_t>(labels_.cols()) != attributes_.size()) {
    throw ValidationError("label column count does not match attribute metadata");
  }
  if (tags_.size() != rows()) throw ValidationError("stochastic tag count does not match row count");
  for (const auto& t : tags_) {
    if (t && t->empty()) throw ValidationError("stochastic tag is present but empty");
  }
  std::set<std::string_view> seen;
  for (const auto& a : attributes_) {
    if (a.name.empty()) throw ValidationError("empty attribute name");
    if (!seen.insert(a.name).second) throw ValidationError("duplicate attribute name '" + a.name + "'");
  }
  if (!codes_.allFinite()) throw ValidationError("latent codes contain non-finite entries");
  for (Eigen::Index j = 0; j < labels_.cols(); ++j) {
    const auto& meta = attributes_[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < labels_.rows(); ++i) {
      const double v = labels_(i, j);
      const bool ok = meta.kind == AttributeKind::binary ? (v == 0.0 || v == 1.0) : (v >= 0.0 && v <= 1.0);
      if (!ok) {
        std::ostringstream msg;
        msg << "label " << v << " out of range for " << to_string(meta.kind) << " attribute '" << meta.name
            << "' (row " << i << ")";
        throw ValidationError(msg.str());
      }
    }
  }
}

std::optional<std::size_t> AttributeTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < attributes_.size(); ++i) {
    if (attributes_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t AttributeTable::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ValidationError("unknown attribute '" + std::string(name) + "'");
}

const AttributeMeta& AttributeTable::attribute(std::string_view name) const {
  return attributes_[index_of(name)];
}

std::vector<std::size_t> AttributeTable::indices_with_role(AttributeRole role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < attributes_.size(); ++i) {
    if (attributes_[i].role == role) out.push_back(i);
  }
  return out;
}

std::vector<std::string> AttributeTable::names_with_role(AttributeRole role) const {
  std::vector<std::string> out;
  for (const auto& a : attributes_) {
    if (a.role == role) out.push_back(a.name);
  }
  return out;
}

LatentCode AttributeTable::code(std::size_t row) const {
  LatentCode c;
  c.z = codes_.row(static_cast<Eigen::Index>(row)).transpose();
  c.tag = tags_[row];
  return c;
}

Vector AttributeTable::column(std::string_view name) const {
  return labels_.col(static_cast<Eigen::Index>(index_of(name)));
}

AttributeTable AttributeTable::select_rows(std::span<const std::size_t> rows) const {
  Matrix codes(static_cast<Eigen::Index>(rows.size()), codes_.cols());
  Matrix labels(static_cast<Eigen::Index>(rows.size()), labels_.cols());
  std::vector<std::optional<StochasticTag>> tags;
  tags.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= this->rows()) throw ValidationError("row index out of range");
    const auto r = static_cast<Eigen::Index>(rows[i]);
    codes.row(static_cast<Eigen::Index>(i)) = codes_.row(r);
    labels.row(static_cast<Eigen::Index>(i)) = labels_.row(r);
    tags.push_back(tags_[rows[i]]);
  }
  if (rows.empty()) return AttributeTable(dimension_, attributes_);
  return AttributeTable(std::move(codes), std::move(labels), attributes_, std::move(tags));
}

AttributeTable AttributeTable::select_attributes(std::span<const std::string> names) const {
  std::vector<AttributeMeta> meta;
  Matrix labels(labels_.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto idx = index_of(names[j]);
    meta.push_back(attributes_[idx]);
    labels.col(static_cast<Eigen::Index>(j)) = labels_.col(static_cast<Eigen::Index>(idx));
  }
  if (rows() == 0) return AttributeTable(dimension_, std::move(meta));
  return AttributeTable(codes_, std::move(labels), std::move(meta), tags_);
}

bool AttributeTable::operator==(const AttributeTable& other) const {
  return dimension_ == other.dimension_ && attributes_ == other.attributes_ && tags_ == other.tags_ &&
         codes_.rows() == other.codes_.rows() && labels_.cols() == other.labels_.cols() &&
         codes_ == other.codes_ && labels_ == other.labels_;
}

AttributeTable::Builder::Builder(std::size_t dimension, std::vector<AttributeMeta> attributes)
    : dimension_(dimension), attributes_(std::move(attributes)) {}

AttributeTable::Builder& AttributeTable::Builder::add(const LatentCode& code, const Vector& labels) {
  return add(code.z, labels, code.tag);
}

AttributeTable::Builder& AttributeTable::Builder::add(const Vector& z, const Vector& labels,
                                                      std::optional<StochasticTag> tag) {
  if (static_cast<std::size_t>(z.size()) != dimension_) throw ValidationError("code length does not match table dimension");
  if (static_cast<std::size_t>(labels.size()) != attributes_.size()) {
    throw ValidationError("label count does not match attribute count");
  }
  codes_.insert(codes_.end(), z.data(), z.data() + z.size());
  labels_.insert(labels_.end(), labels.data(), labels.data() + labels.size());
  tags_.push_back(std::move(tag));
  return *this;
}

AttributeTable AttributeTable::Builder::build() const {
  const auto n = static_cast<Eigen::Index>(tags_.size());
  if (n == 0) return AttributeTable(dimension_, attributes_);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Matrix codes = Eigen::Map<const RowMajor>(codes_.data(), n, static_cast<Eigen::Index>(dimension_));
  Matrix labels = Eigen::Map<const RowMajor>(labels_.data(), n, static_cast<Eigen::Index>(attributes_.size()));
  return AttributeTable(std::move(codes), std::move(labels), attributes_, tags_);
}

AttributeTable concat(std::span<const AttributeTable> tables) {
  if (tables.empty()) throw ValidationError("concat: no tables");
  const auto& first = tables.front();
  Eigen::Index n = 0;
  for (const auto& t : tables) {
    if (t.dimension() != first.dimension() || t.attributes() != first.attributes()) {
      throw ValidationError("concat: tables differ in dimension or attributes");
    }
    n += static_cast<Eigen::Index>(t.rows());
  }
  if (n == 0) return AttributeTable(first.dimension(), first.attributes());
  Matrix codes(n, static_cast<Eigen::Index>(first.dimension()));
  Matrix labels(n, static_cast<Eigen::Index>(first.attribute_count()));
  std::vector<std::optional<StochasticTag>> tags;
  Eigen::Index at = 0;
  for (const auto& t : tables) {
    const auto r = static_cast<Eigen::Index>(t.rows());
    codes.middleRows(at, r) = t.codes();
    labels.middleRows(at, r) = t.labels();
    tags.insert(tags.end(), t.tags().begin(), t.tags().end());
    at += r;
  }
  return AttributeTable(std::move(codes), std::move(labels), first.attributes(), std::move(tags));
}

// ---------------------------------------------------------------------------
// Provenance

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string format_provenance(std::span<const ProvenanceStep> steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out.push_back(';');
    switch (steps[i].kind) {
      case ProvenanceStep::Kind::base: out += "base"; break;
      case ProvenanceStep::Kind::conditioned: out += "conditioned(" + join(steps[i].names, ',') + ")"; break;
      case ProvenanceStep::Kind::projected: out += "projected(" + join(steps[i].names, ',') + ")"; break;
    }
  }
  return out;
}

std::vector<ProvenanceStep> parse_provenance(std::string_view text) {
  std::vector<ProvenanceStep> steps;
  for (const auto& part : split(text, ';')) {
    ProvenanceStep step;
    if (part == "base") {
      step.kind = ProvenanceStep::Kind::base;
    } else {
      const auto open = part.find('(');
      if (open == std::string::npos || part.back() != ')') {
        throw ValidationError("malformed provenance step '" + part + "'");
      }
      const auto head = part.substr(0, open);
      if (head == "conditioned") {
        step.kind = ProvenanceStep::Kind::conditioned;
      } else if (head == "projected") {
        step.kind = ProvenanceStep::Kind::projected;
      } else {
        throw ValidationError("unknown provenance kind '" + head + "'");
      }
      step.names = split(std::string_view(part).substr(open + 1, part.size() - open - 2), ',');
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

// ---------------------------------------------------------------------------
// Direction

Direction Direction::from_raw(std::string name, const Vector& raw, double intercept,
                              std::vector<ProvenanceStep> provenance) {
  Direction d;
  d.name_ = std::move(name);
  d.intercept_ = intercept;
  d.provenance_ = std::move(provenance);
  const double norm = raw.norm();
  if (!std::isfinite(norm) || norm == 0.0) {
    d.unit_ = Vector::Zero(raw.size());
    d.calibration_ = 0.0;
    d.degenerate_ = true;
  } else {
    d.unit_ = raw / norm;
    d.calibration_ = norm;
    d.degenerate_ = false;
  }
  return d;
}

Direction Direction::from_parts(std::string name, Vector unit, double calibration, double intercept,
                                std::vector<ProvenanceStep> provenance, bool degenerate) {
  if (!unit.allFinite() || !std::isfinite(calibration) || !std::isfinite(intercept)) {
    throw ValidationError("direction '" + name + "' has non-finite values");
  }
  if (!degenerate) {
    if (std::abs(unit.norm() - 1.0) > 1e-9) throw ValidationError("direction '" + name + "' is not unit-norm");
    if (!(calibration > 0.0)) throw ValidationError("direction '" + name + "' has non-positive calibration");
  }
  Direction d;
  d.name_ = std::move(name);
  d.unit_ = std::move(unit);
  d.calibration_ = calibration;
  d.intercept_ = intercept;
  d.provenance_ = std::move(provenance);
  d.degenerate_ = degenerate;
  return d;
}

bool Direction::operator==(const Direction& other) const {
  return name_ == other.name_ && unit_.size() == other.unit_.size() && unit_ == other.unit_ &&
         calibration_ == other.calibration_ && intercept_ == other.intercept_ &&
         provenance_ == other.provenance_ && degenerate_ == other.degenerate_;
}

bool DirectionBank::contains(std::string_view name) const { return directions_.find(name) != directions_.end(); }

void DirectionBank::put(Direction direction) {
  if (direction.dimension() != dimension_) {
    throw ValidationError("direction '" + direction.name() + "' has length " + std::to_string(direction.dimension()) +
                          ", bank dimension is " + std::to_string(dimension_));
  }
  auto name = direction.name();
  directions_.insert_or_assign(std::move(name), std::move(direction));
}

const Direction& DirectionBank::get(std::string_view name) const {
  auto it = directions_.find(name);
  if (it == directions_.end()) throw ValidationError("no direction named '" + std::string(name) + "'");
  return it->second;
}

}  // namespace lsedit
