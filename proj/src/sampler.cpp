#include "lsedit/sampler.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "lsedit/errors.hpp"
#include "lsedit/table_io.hpp"

namespace lsedit {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t x = base + 0x9E3779B97F4A7C15ull * (index + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

GeneratorSource GeneratorSource::oracle(const OracleSpec& spec, std::uint64_t seed) {
  GeneratorSource s;
  s.oracle_ = std::make_shared<OracleStream>(spec, seed);
  s.dimension_ = spec.dimension();
  s.attributes_ = spec.attributes();
  return s;
}

GeneratorSource GeneratorSource::table(AttributeTable table) {
  GeneratorSource s;
  s.dimension_ = table.dimension();
  s.attributes_ = table.attributes();
  s.table_ = std::move(table);
  return s;
}

bool GeneratorSource::next(LatentCode& code, Vector& labels) {
  if (oracle_) {
    oracle_->draw(labels, code);
    return true;
  }
  if (cursor_ >= table_->rows()) return false;
  code = table_->code(cursor_);
  labels = table_->label_row(cursor_);
  ++cursor_;
  return true;
}

const LinearPredictor& predictor_for(std::span<const LinearPredictor> predictors, std::string_view attribute) {
  for (const auto& p : predictors) {
    if (p.target == attribute) return p;
  }
  throw ValidationError("no predictor for filter attribute '" + std::string(attribute) + "'");
}

std::size_t cell_count(const LinearPredictor& predictor) {
  return predictor.kind == PredictorKind::logistic ? 2 : predictor.bins.size() + 1;
}

std::size_t predicted_cell(const LinearPredictor& predictor, const Vector& z) {
  const double y = predict(predictor, z);
  if (predictor.kind == PredictorKind::logistic) return y >= 0.5 ? 1 : 0;
  return static_cast<std::size_t>(std::upper_bound(predictor.bins.begin(), predictor.bins.end(), y) -
                                  predictor.bins.begin());
}

namespace {

void check_filter(const DemographicFilter& filter, std::span<const LinearPredictor> predictors, std::size_t dimension) {
  for (const auto& rule : filter.rules) {
    const auto& p = predictor_for(predictors, rule.attribute);
    if (!p.covariates.empty()) {
      throw ValidationError("filter predictor '" + rule.attribute + "' must not use covariates");
    }
    if (p.latent_dimension() != dimension) {
      throw ValidationError("filter predictor '" + rule.attribute + "' has dimension " +
                            std::to_string(p.latent_dimension()) + ", source has " + std::to_string(dimension));
    }
    if (!std::is_sorted(p.bins.begin(), p.bins.end()) ||
        std::adjacent_find(p.bins.begin(), p.bins.end()) != p.bins.end()) {
      throw ValidationError("bins of predictor '" + rule.attribute + "' are not strictly increasing");
    }
    if (rule.required >= cell_count(p)) {
      throw ValidationError("filter on '" + rule.attribute + "' asks for cell " + std::to_string(rule.required) +
                            " of " + std::to_string(cell_count(p)));
    }
  }
}

std::string rate_text(std::size_t accepted, std::size_t draws) {
  std::ostringstream out;
  out << accepted << " accepted in " << draws << " draws (rate "
      << format_real(draws ? static_cast<double>(accepted) / static_cast<double>(draws) : 0.0) << ")";
  return out.str();
}

}  // namespace

bool accepts(const DemographicFilter& filter, std::span<const LinearPredictor> predictors, const Vector& z) {
  for (const auto& rule : filter.rules) {
    if (predicted_cell(predictor_for(predictors, rule.attribute), z) != rule.required) return false;
  }
  return true;
}

SampleResult accept_reject_sample(GeneratorSource& source, const DemographicFilter& filter,
                                  std::span<const LinearPredictor> predictors, std::size_t n_target,
                                  std::size_t max_draws) {
  const PlanCell cell{filter, n_target};
  return sample_plan(source, std::span<const PlanCell>(&cell, 1), predictors, max_draws);
}

std::vector<CellAttribute> parse_cell_attributes(std::string_view text, std::span<const LinearPredictor> predictors) {
  std::vector<CellAttribute> out;
  for (const auto& item : split_list(text)) {
    auto has = [&](std::string_view name) {
      return std::any_of(predictors.begin(), predictors.end(), [&](const auto& p) { return p.target == name; });
    };
    if (has(item)) {
      out.push_back({item, cell_count(predictor_for(predictors, item))});
      continue;
    }
    std::size_t cut = item.size();
    while (cut > 0 && std::isdigit(static_cast<unsigned char>(item[cut - 1]))) --cut;
    if (cut == item.size() || cut == 0 || !has(item.substr(0, cut))) {
      throw ValidationError("no predictor for filter attribute '" + item + "'");
    }
    const auto name = item.substr(0, cut);
    const auto cells = static_cast<std::size_t>(parse_integer(item.substr(cut), "bin count"));
    const auto& p = predictor_for(predictors, name);
    if (p.kind == PredictorKind::logistic && cells != 2) {
      throw ValidationError("binary attribute '" + name + "' has 2 cells, not " + std::to_string(cells));
    }
    if (p.kind == PredictorKind::ridge && cells != p.bins.size() + 1) {
      throw ValidationError("predictor '" + name + "' defines " + std::to_string(p.bins.size() + 1) +
                            " bins, filter asks for " + std::to_string(cells));
    }
    out.push_back({name, cells});
  }
  return out;
}

std::vector<PlanCell> balanced_demographic_plan(std::span<const CellAttribute> attributes, std::size_t per_cell) {
  if (attributes.empty()) throw ValidationError("balanced plan needs at least one attribute");
  std::vector<PlanCell> plan{PlanCell{{}, per_cell}};
  for (const auto& attr : attributes) {
    if (attr.cells == 0) throw ValidationError("attribute '" + attr.name + "' has no cells");
    std::vector<PlanCell> next;
    for (const auto& cell : plan) {
      for (std::size_t c = 0; c < attr.cells; ++c) {
        PlanCell extended = cell;
        extended.filter.rules.push_back({attr.name, c});
        next.push_back(std::move(extended));
      }
    }
    plan = std::move(next);
  }
  return plan;
}

SampleResult sample_plan(GeneratorSource& source, std::span<const PlanCell> plan,
                         std::span<const LinearPredictor> predictors, std::size_t max_draws, const DrawHook& hook) {
  for (const auto& cell : plan) check_filter(cell.filter, predictors, source.dimension());

  std::vector<AttributeTable::Builder> cells;
  std::size_t remaining = 0;
  for (const auto& cell : plan) {
    cells.emplace_back(source.dimension(), source.attributes());
    remaining += cell.count;
  }
  const std::size_t target = remaining;

  SampleResult result{AttributeTable(source.dimension(), source.attributes()), 0, 0};
  LatentCode code;
  Vector labels;
  while (remaining > 0) {
    if (result.draws >= max_draws) {
      throw NumericalError("sampling budget of " + std::to_string(max_draws) + " draws exhausted: " +
                           rate_text(target - remaining, result.draws));
    }
    if (!source.next(code, labels)) {
      throw NumericalError("generator source exhausted: " + rate_text(target - remaining, result.draws));
    }
    ++result.draws;
    for (std::size_t c = 0; c < plan.size(); ++c) {
      if (!accepts(plan[c].filter, predictors, code.z)) continue;
      if (cells[c].rows() < plan[c].count) {
        if (hook && !hook(c, code, labels)) {
          ++result.vetoed;
        } else {
          cells[c].add(code, labels);
          --remaining;
        }
      }
      break;
    }
  }
  std::vector<AttributeTable> parts;
  for (const auto& b : cells) parts.push_back(b.build());
  if (!parts.empty()) result.table = concat(parts);
  return result;
}

}  // namespace lsedit
