#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "regdiff/errors.hpp"

namespace regdiff {

/// Minimal TOML reader covering what run configs need: [table] headers,
/// string/integer/float/boolean scalars, flat arrays, and comments. Keys are
/// exposed flattened ("strategy.ransac.seed").
class TomlValue {
 public:
  using Array = std::vector<TomlValue>;

  TomlValue() : value_(false) {}
  explicit TomlValue(bool v) : value_(v) {}
  explicit TomlValue(std::int64_t v) : value_(v) {}
  explicit TomlValue(double v) : value_(v) {}
  explicit TomlValue(std::string v) : value_(std::move(v)) {}
  explicit TomlValue(Array v) : value_(std::move(v)) {}

  bool is_bool() const { return std::holds_alternative<bool>(value_); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(value_); }
  bool is_float() const { return std::holds_alternative<double>(value_); }
  bool is_string() const { return std::holds_alternative<std::string>(value_); }
  bool is_array() const { return std::holds_alternative<Array>(value_); }

  bool as_bool() const;
  std::int64_t as_int() const;
  double as_double() const;  // integers promote
  const std::string& as_string() const;
  const Array& as_array() const;

 private:
  std::variant<bool, std::int64_t, double, std::string, Array> value_;
};

class TomlTable {
 public:
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const TomlValue& at(const std::string& key) const;

  bool get_bool(const std::string& key, bool fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_double_array(const std::string& key) const;  // empty if absent
  std::vector<std::string> get_string_array(const std::string& key) const;

  void set(const std::string& key, TomlValue value) { values_[key] = std::move(value); }
  const std::map<std::string, TomlValue>& entries() const { return values_; }

 private:
  std::map<std::string, TomlValue> values_;
};

TomlTable parse_toml(const std::string& text);
TomlTable load_toml(const std::filesystem::path& path);

}  // namespace regdiff
