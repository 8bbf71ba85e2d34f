#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lsedit/core.hpp"

namespace lsedit {

enum class EditMode { relative, absolute_after_neutralization };

struct EditTarget {
  std::string direction;
  double step = 0.0;  // in predictor-output units
};

struct EditRequest {
  std::vector<EditTarget> targets;
  EditMode mode = EditMode::relative;
};

// Parses "au12=+1,au6=0.5".
EditRequest parse_edit_request(std::string_view text, EditMode mode = EditMode::relative);

// z' = z + (s / calibration) * unit, so the fitted predictor's raw output
// moves by exactly s. The stochastic tag is carried unchanged.
LatentCode apply_edit(const LatentCode& code, const Direction& dir, double step);

// Single summed displacement over all targets.
LatentCode apply_multi_edit(const LatentCode& code, const DirectionBank& bank, const EditRequest& request);

// Latent displacement that apply_multi_edit adds.
Vector edit_displacement(const DirectionBank& bank, const EditRequest& request);

AttributeTable apply_multi_edit(const AttributeTable& table, const DirectionBank& bank, const EditRequest& request);

}  // namespace lsedit
