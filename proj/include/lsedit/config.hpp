#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lsedit {

// Flat `key=value` text config with dotted keys. '#' starts a comment line.
// Every lookup marks the key as consumed so callers can reject unknown keys.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(std::string_view text, std::string_view source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  void set(std::string key, std::string value);
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

  std::string get_string(std::string_view key) const;
  std::string get_string(std::string_view key, std::string_view fallback) const;
  double get_real(std::string_view key) const;
  double get_real(std::string_view key, double fallback) const;
  long long get_integer(std::string_view key) const;
  long long get_integer(std::string_view key, long long fallback) const;
  std::size_t get_count(std::string_view key, std::size_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<std::string> get_list(std::string_view key) const;
  std::vector<double> get_real_list(std::string_view key) const;

  // Keys never read through a getter.
  std::vector<std::string> unused_keys() const;
  // Throws UsageError naming the first key that was never read.
  void reject_unused(std::string_view context) const;

  // Canonical rendering: sorted `key=value` lines.
  std::string render() const;

 private:
  const std::string& raw(std::string_view key) const;
  std::string source_;
  std::map<std::string, std::string, std::less<>> entries_;
  mutable std::set<std::string, std::less<>> used_;
};

// 64-bit FNV-1a digest, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace lsedit
