#include "lsedit/editor.hpp"

#include <cmath>

#include "lsedit/errors.hpp"
#include "lsedit/table_io.hpp"

namespace lsedit {

EditRequest parse_edit_request(std::string_view text, EditMode mode) {
  EditRequest req;
  req.mode = mode;
  for (const auto& item : split_list(text)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("edit target '" + item + "' is not of the form name=step");
    EditTarget target{item.substr(0, eq), parse_real(std::string_view(item).substr(eq + 1), item)};
    if (!std::isfinite(target.step)) throw ValidationError("edit step for '" + target.direction + "' is not finite");
    req.targets.push_back(std::move(target));
  }
  return req;
}

namespace {

void check_usable(const Direction& dir, std::size_t dimension) {
  if (dir.degenerate()) throw ValidationError("direction '" + dir.name() + "' is degenerate and cannot be applied");
  if (dir.dimension() != dimension) {
    throw ValidationError("direction '" + dir.name() + "' has length " + std::to_string(dir.dimension()) +
                          ", code has length " + std::to_string(dimension));
  }
}

}  // namespace

LatentCode apply_edit(const LatentCode& code, const Direction& dir, double step) {
  check_usable(dir, code.dimension());
  if (!std::isfinite(step)) throw ValidationError("edit step is not finite");
  LatentCode out = code;
  out.z += (step / dir.calibration()) * dir.unit();
  return out;
}

Vector edit_displacement(const DirectionBank& bank, const EditRequest& request) {
  Vector delta = Vector::Zero(static_cast<Eigen::Index>(bank.dimension()));
  for (const auto& t : request.targets) {
    const auto& dir = bank.get(t.direction);
    check_usable(dir, bank.dimension());
    if (!std::isfinite(t.step)) throw ValidationError("edit step for '" + t.direction + "' is not finite");
    delta += (t.step / dir.calibration()) * dir.unit();
  }
  return delta;
}

LatentCode apply_multi_edit(const LatentCode& code, const DirectionBank& bank, const EditRequest& request) {
  if (code.dimension() != bank.dimension()) {
    throw ValidationError("code length " + std::to_string(code.dimension()) + " does not match bank dimension " +
                          std::to_string(bank.dimension()));
  }
  LatentCode out = code;
  out.z += edit_displacement(bank, request);
  return out;
}

AttributeTable apply_multi_edit(const AttributeTable& table, const DirectionBank& bank, const EditRequest& request) {
  if (table.dimension() != bank.dimension()) {
    throw ValidationError("table dimension " + std::to_string(table.dimension()) + " does not match bank dimension " +
                          std::to_string(bank.dimension()));
  }
  const Vector delta = edit_displacement(bank, request);
  if (table.rows() == 0) return table;
  Matrix codes = table.codes().rowwise() + delta.transpose();
  return AttributeTable(std::move(codes), table.labels(), table.attributes(), table.tags());
}

}  // namespace lsedit
