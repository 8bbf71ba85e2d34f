#include "lsedit/config.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>

#include "lsedit/errors.hpp"
#include "lsedit/table_io.hpp"

namespace lsedit {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string_view source) {
  KeyValueConfig cfg;
  cfg.source_ = std::string(source);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(cfg.source_ + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = trim(t.substr(0, eq));
    const auto value = trim(t.substr(eq + 1));
    if (key.empty()) throw ValidationError(cfg.source_ + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.entries_.count(key)) {
      throw ValidationError(cfg.source_ + ":" + std::to_string(lineno) + ": duplicate key '" + std::string(key) + "'");
    }
    cfg.entries_.emplace(std::string(key), std::string(value));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

bool KeyValueConfig::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

void KeyValueConfig::set(std::string key, std::string value) { entries_.insert_or_assign(std::move(key), std::move(value)); }

const std::string& KeyValueConfig::raw(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ValidationError(source_ + ": missing required key '" + std::string(key) + "'");
  used_.insert(std::string(key));
  return it->second;
}

std::string KeyValueConfig::get_string(std::string_view key) const { return raw(key); }

std::string KeyValueConfig::get_string(std::string_view key, std::string_view fallback) const {
  return has(key) ? raw(key) : std::string(fallback);
}

double KeyValueConfig::get_real(std::string_view key) const {
  try {
    return parse_real(raw(key), key);
  } catch (const ValidationError& e) {
    throw ValidationError(source_ + ": key '" + std::string(key) + "': " + e.what());
  }
}

double KeyValueConfig::get_real(std::string_view key, double fallback) const {
  return has(key) ? get_real(key) : fallback;
}

long long KeyValueConfig::get_integer(std::string_view key) const {
  try {
    return parse_integer(raw(key), key);
  } catch (const ValidationError& e) {
    throw ValidationError(source_ + ": key '" + std::string(key) + "': " + e.what());
  }
}

long long KeyValueConfig::get_integer(std::string_view key, long long fallback) const {
  return has(key) ? get_integer(key) : fallback;
}

std::size_t KeyValueConfig::get_count(std::string_view key, std::size_t fallback) const {
  if (!has(key)) return fallback;
  const auto v = get_integer(key);
  if (v < 0) throw ValidationError(source_ + ": key '" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(source_ + ": key '" + std::string(key) + "' expects a boolean, got '" + v + "'");
}

std::vector<std::string> KeyValueConfig::get_list(std::string_view key) const { return split_list(raw(key)); }

std::vector<double> KeyValueConfig::get_real_list(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    try {
      out.push_back(parse_real(item, key));
    } catch (const ValidationError& e) {
      throw ValidationError(source_ + ": key '" + std::string(key) + "': " + e.what());
    }
  }
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (!used_.count(k)) out.push_back(k);
  }
  return out;
}

void KeyValueConfig::reject_unused(std::string_view context) const {
  const auto unused = unused_keys();
  if (!unused.empty()) {
    throw UsageError(std::string(context) + ": unknown configuration key '" + unused.front() + "'");
  }
}

std::string KeyValueConfig::render() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lsedit
