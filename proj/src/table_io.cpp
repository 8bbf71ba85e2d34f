#include "lsedit/table_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lsedit/errors.hpp"

namespace lsedit {

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw NumericalError("cannot format value");
  return std::string(buf, ptr);
}

double parse_real(std::string_view token, std::string_view what) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || token.empty()) {
    throw ValidationError("invalid number '" + std::string(token) + "' for " + std::string(what));
  }
  return value;
}

long long parse_integer(std::string_view token, std::string_view what) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
    throw ValidationError("invalid integer '" + std::string(token) + "' for " + std::string(what));
  }
  return value;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) pos = text.size();
    auto item = text.substr(start, pos - start);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (!item.empty()) out.emplace_back(item);
    start = pos + 1;
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::size_t parse_dimension(std::string_view line, std::string_view source, std::size_t lineno) {
  if (!starts_with(line, "dimension=")) throw ValidationError(where(source, lineno) + "expected 'dimension=<d>' header");
  const auto d = parse_integer(line.substr(10), "dimension");
  if (d <= 0) throw ValidationError(where(source, lineno) + "dimension must be positive");
  return static_cast<std::size_t>(d);
}

}  // namespace

AttributeTable read_attribute_table(std::istream& in, std::string_view source) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> dimension;
  std::vector<AttributeMeta> attributes;
  bool in_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!dimension) {
      dimension = parse_dimension(t, source, lineno);
      continue;
    }
    if (t == "data") {
      in_data = true;
      break;
    }
    const auto tokens = split_whitespace(t);
    if (tokens.size() != 4 || tokens[0] != "attr") {
      throw ValidationError(where(source, lineno) + "malformed header line '" + std::string(t) + "'");
    }
    try {
      attributes.push_back({std::string(tokens[1]), parse_kind(tokens[2]), parse_role(tokens[3])});
    } catch (const ValidationError& e) {
      throw ValidationError(where(source, lineno) + e.what());
    }
  }
  if (!dimension) throw ValidationError(std::string(source) + ": missing 'dimension=' header");
  if (!in_data) throw ValidationError(std::string(source) + ": missing 'data' section marker");

  const std::size_t d = *dimension;
  const std::size_t m = attributes.size();
  AttributeTable::Builder builder(d, attributes);
  Vector z(static_cast<Eigen::Index>(d));
  Vector labels(static_cast<Eigen::Index>(m));
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto tokens = split_whitespace(t);
    if (tokens.size() != d + m && tokens.size() != d + m + 1) {
      throw ValidationError(where(source, lineno) + "row has " + std::to_string(tokens.size()) + " fields, expected " +
                            std::to_string(d + m) + " (+ optional tag)");
    }
    try {
      for (std::size_t i = 0; i < d; ++i) z[static_cast<Eigen::Index>(i)] = parse_real(tokens[i], "latent value");
      for (std::size_t j = 0; j < m; ++j) {
        labels[static_cast<Eigen::Index>(j)] = parse_real(tokens[d + j], attributes[j].name);
      }
      std::optional<StochasticTag> tag;
      if (tokens.size() == d + m + 1) tag = base64_decode(tokens.back());
      builder.add(z, labels, std::move(tag));
    } catch (const ValidationError& e) {
      throw ValidationError(where(source, lineno) + e.what());
    }
  }
  try {
    return builder.build();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(source) + ": " + e.what());
  }
}

void write_attribute_table(std::ostream& out, const AttributeTable& table) {
  out << "dimension=" << table.dimension() << '\n';
  for (const auto& a : table.attributes()) {
    out << "attr " << a.name << ' ' << to_string(a.kind) << ' ' << to_string(a.role) << '\n';
  }
  out << "data\n";
  const auto& codes = table.codes();
  const auto& labels = table.labels();
  std::string row;
  for (Eigen::Index i = 0; i < codes.rows(); ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < codes.cols(); ++j) {
      if (j) row.push_back(' ');
      row += format_real(codes(i, j));
    }
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      row.push_back(' ');
      row += format_real(labels(i, j));
    }
    if (const auto& tag = table.tags()[static_cast<std::size_t>(i)]) {
      row.push_back(' ');
      row += base64_encode(*tag);
    }
    row.push_back('\n');
    out << row;
  }
}

AttributeTable load_attribute_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open table '" + path.string() + "'");
  return read_attribute_table(in, path.string());
}

void save_attribute_table(const AttributeTable& table, const std::filesystem::path& path) {
  std::ostringstream out;
  write_attribute_table(out, table);
  write_text_file(path, out.str());
}

DirectionBank read_direction_bank(std::istream& in, std::optional<std::size_t> expected_dimension,
                                  std::string_view source) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<DirectionBank> bank;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!bank) {
      const auto d = parse_dimension(t, source, lineno);
      if (expected_dimension && *expected_dimension != d) {
        throw ValidationError(where(source, lineno) + "bank dimension " + std::to_string(d) + " does not match expected " +
                              std::to_string(*expected_dimension));
      }
      bank.emplace(d);
      continue;
    }
    const auto head = split_whitespace(t);
    if (head.size() != 6 || head[0] != "direction") {
      throw ValidationError(where(source, lineno) + "expected 'direction <name> calibration= intercept= degenerate= provenance='");
    }
    auto field = [&](std::string_view tok, std::string_view key) {
      if (!starts_with(tok, key) || tok.size() <= key.size() || tok[key.size()] != '=') {
        throw ValidationError(where(source, lineno) + "expected field '" + std::string(key) + "='");
      }
      return tok.substr(key.size() + 1);
    };
    const std::string name(head[1]);
    try {
      const double calibration = parse_real(field(head[2], "calibration"), "calibration");
      const double intercept = parse_real(field(head[3], "intercept"), "intercept");
      const auto degenerate_text = field(head[4], "degenerate");
      if (degenerate_text != "0" && degenerate_text != "1") throw ValidationError("degenerate must be 0 or 1");
      auto provenance = parse_provenance(field(head[5], "provenance"));

      std::string vec_line;
      do {
        if (!std::getline(in, vec_line)) throw ValidationError("missing vector for direction '" + name + "'");
        ++lineno;
      } while (trim(vec_line).empty());
      const auto values = split_whitespace(vec_line);
      if (values.size() != bank->dimension()) {
        throw ValidationError("direction '" + name + "' has " + std::to_string(values.size()) +
                              " components, bank dimension is " + std::to_string(bank->dimension()));
      }
      Vector unit(static_cast<Eigen::Index>(values.size()));
      for (std::size_t i = 0; i < values.size(); ++i) unit[static_cast<Eigen::Index>(i)] = parse_real(values[i], name);
      if (bank->contains(name)) throw ValidationError("duplicate direction '" + name + "'");
      bank->put(Direction::from_parts(name, std::move(unit), calibration, intercept, std::move(provenance),
                                      degenerate_text == "1"));
    } catch (const ValidationError& e) {
      throw ValidationError(where(source, lineno) + e.what());
    }
  }
  if (!bank) throw ValidationError(std::string(source) + ": missing 'dimension=' header");
  return std::move(*bank);
}

void write_direction_bank(std::ostream& out, const DirectionBank& bank) {
  out << "dimension=" << bank.dimension() << '\n';
  for (const auto& [name, dir] : bank.directions()) {
    out << "direction " << name << " calibration=" << format_real(dir.calibration())
        << " intercept=" << format_real(dir.intercept()) << " degenerate=" << (dir.degenerate() ? 1 : 0)
        << " provenance=" << format_provenance(dir.provenance()) << '\n';
    for (Eigen::Index i = 0; i < dir.unit().size(); ++i) {
      if (i) out << ' ';
      out << format_real(dir.unit()[i]);
    }
    out << '\n';
  }
}

DirectionBank load_direction_bank(const std::filesystem::path& path, std::optional<std::size_t> expected_dimension) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open direction bank '" + path.string() + "'");
  return read_direction_bank(in, expected_dimension, path.string());
}

void save_direction_bank(const DirectionBank& bank, const std::filesystem::path& path) {
  std::ostringstream out;
  write_direction_bank(out, bank);
  write_text_file(path, out.str());
}

}  // namespace lsedit
