#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lsedit/core.hpp"

namespace lsedit {

// Shortest decimal rendering that parses back to the identical double.
std::string format_real(double value);
// Strict parse of a full token; `what` names the field in error messages.
double parse_real(std::string_view token, std::string_view what);
long long parse_integer(std::string_view token, std::string_view what);

std::vector<std::string_view> split_whitespace(std::string_view line);
std::vector<std::string> split_list(std::string_view text, char sep = ',');

// Latent-table text format:
//
//   dimension=<d>
//   attr <name> <continuous|binary> <AU|demographic|nuisance>   (one per label column)
//   data
//   <d latent values> <m label values> [base64 tag]             (one per row)
//
// Lines starting with '#' before `data` are comments.
AttributeTable read_attribute_table(std::istream& in, std::string_view source = "<stream>");
void write_attribute_table(std::ostream& out, const AttributeTable& table);
AttributeTable load_attribute_table(const std::filesystem::path& path);
void save_attribute_table(const AttributeTable& table, const std::filesystem::path& path);

// Direction-bank text format:
//
//   dimension=<d>
//   direction <name> calibration=<c> intercept=<b> degenerate=<0|1> provenance=<steps>
//   <d unit-vector values>
DirectionBank read_direction_bank(std::istream& in, std::optional<std::size_t> expected_dimension = std::nullopt,
                                  std::string_view source = "<stream>");
void write_direction_bank(std::ostream& out, const DirectionBank& bank);
DirectionBank load_direction_bank(const std::filesystem::path& path,
                                  std::optional<std::size_t> expected_dimension = std::nullopt);
void save_direction_bank(const DirectionBank& bank, const std::filesystem::path& path);

// Whole-file helpers; failures raise IoError.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace lsedit
