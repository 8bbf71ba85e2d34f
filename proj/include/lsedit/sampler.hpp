#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsedit/core.hpp"
#include "lsedit/linfit.hpp"
#include "lsedit/oracle.hpp"

namespace lsedit {

// Derives an independent stream seed (splitmix64 finalizer over base and index).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

// Where candidate codes come from: a seeded oracle stream or the rows of an
// existing table, in order. Labels travel with each draw.
class GeneratorSource {
 public:
  static GeneratorSource oracle(const OracleSpec& spec, std::uint64_t seed);
  static GeneratorSource table(AttributeTable table);

  std::size_t dimension() const { return dimension_; }
  const std::vector<AttributeMeta>& attributes() const { return attributes_; }

  // False once a table source is exhausted; oracle sources never run out.
  bool next(LatentCode& code, Vector& labels);

 private:
  GeneratorSource() = default;
  std::size_t dimension_ = 0;
  std::vector<AttributeMeta> attributes_;
  std::shared_ptr<OracleStream> oracle_;
  std::optional<AttributeTable> table_;
  std::size_t cursor_ = 0;
};

// One acceptance rule. Binary attributes: predictor output >= 0.5 is class 1.
// Continuous attributes: the predictor's ordered bin boundaries split the
// output into bins.size() + 1 bins; bin b covers [bins[b-1], bins[b]).
struct FilterRule {
  std::string attribute;
  std::size_t required = 0;  // class or bin index
};

struct DemographicFilter {
  std::vector<FilterRule> rules;
};

// Class or bin index of a code under the predictor for one attribute.
std::size_t predicted_cell(const LinearPredictor& predictor, const Vector& z);
std::size_t cell_count(const LinearPredictor& predictor);

bool accepts(const DemographicFilter& filter, std::span<const LinearPredictor> predictors, const Vector& z);

struct SampleResult {
  AttributeTable table;
  std::size_t draws = 0;
  std::size_t vetoed = 0;  // draws rejected by a DrawHook
  double acceptance_rate() const { return draws ? static_cast<double>(table.rows()) / static_cast<double>(draws) : 0.0; }
};

inline constexpr std::size_t kDefaultDrawsPerTarget = 1000;

// Draws until n_target codes pass the filter. Throws NumericalError (with
// the achieved acceptance rate) when max_draws runs out first, and
// ValidationError when a rule names an attribute without a predictor.
SampleResult accept_reject_sample(GeneratorSource& source, const DemographicFilter& filter,
                                  std::span<const LinearPredictor> predictors, std::size_t n_target,
                                  std::size_t max_draws);

// Attribute taking part in a balanced plan, with its number of cells.
struct CellAttribute {
  std::string name;
  std::size_t cells = 2;
};

// Parses "gender,age3": a name that is not a predictor target but becomes
// one after stripping a trailing count K is a K-bin attribute; otherwise the
// attribute takes its cell count from the predictor (2 for binary).
std::vector<CellAttribute> parse_cell_attributes(std::string_view text, std::span<const LinearPredictor> predictors);

struct PlanCell {
  DemographicFilter filter;
  std::size_t count = 0;
};

// Cartesian product over the attribute cells, first attribute varying slowest.
std::vector<PlanCell> balanced_demographic_plan(std::span<const CellAttribute> attributes, std::size_t per_cell);

// Called on each draw that landed in a cell with open quota. May rewrite the
// code and labels; returning false rejects the draw.
using DrawHook = std::function<bool(std::size_t cell, LatentCode& code, Vector& labels)>;

// Fills every cell of a plan from one draw stream: each draw goes to the
// first cell whose filter it passes, if that cell still has quota. Output
// rows are grouped by cell, in plan order.
SampleResult sample_plan(GeneratorSource& source, std::span<const PlanCell> plan,
                         std::span<const LinearPredictor> predictors, std::size_t max_draws,
                         const DrawHook& hook = {});

const LinearPredictor& predictor_for(std::span<const LinearPredictor> predictors, std::string_view attribute);

}  // namespace lsedit
