#include "regdiff/toml.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace regdiff {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw IoError("TOML line " + std::to_string(line) + ": " + what);
}

void skip_ws(const std::string& s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

bool key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

std::string parse_basic_string(const std::string& s, std::size_t& i, int line) {
  // s[i] == '"'
  std::string out;
  ++i;
  while (i < s.size() && s[i] != '"') {
    if (s[i] == '\\') {
      ++i;
      if (i >= s.size()) fail(line, "dangling escape");
      switch (s[i]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(line, std::string("unsupported escape \\") + s[i]);
      }
    } else {
      out.push_back(s[i]);
    }
    ++i;
  }
  if (i >= s.size()) fail(line, "unterminated string");
  ++i;  // closing quote
  return out;
}

TomlValue parse_scalar(const std::string& token, int line) {
  if (token == "true") return TomlValue(true);
  if (token == "false") return TomlValue(false);
  if (token.empty()) fail(line, "empty value");
  const bool looks_float = token.find_first_of(".eE") != std::string::npos &&
                           token.find_first_not_of("+-0123456789.eE") == std::string::npos;
  try {
    if (looks_float) {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) fail(line, "bad number: " + token);
      return TomlValue(v);
    }
    std::size_t used = 0;
    const std::int64_t v = std::stoll(token, &used, 10);
    if (used != token.size()) fail(line, "bad integer: " + token);
    return TomlValue(v);
  } catch (const std::exception&) {
    fail(line, "cannot parse value: " + token);
  }
}

TomlValue parse_value(const std::string& s, std::size_t& i, int line);

TomlValue parse_array(const std::string& s, std::size_t& i, int line) {
  // s[i] == '['
  ++i;
  TomlValue::Array items;
  while (true) {
    skip_ws(s, i);
    if (i >= s.size()) fail(line, "unterminated array");
    if (s[i] == ']') {
      ++i;
      break;
    }
    items.push_back(parse_value(s, i, line));
    skip_ws(s, i);
    if (i < s.size() && s[i] == ',') {
      ++i;
      continue;
    }
    if (i < s.size() && s[i] == ']') {
      ++i;
      break;
    }
    fail(line, "expected ',' or ']' in array");
  }
  return TomlValue(std::move(items));
}

TomlValue parse_value(const std::string& s, std::size_t& i, int line) {
  skip_ws(s, i);
  if (i >= s.size()) fail(line, "missing value");
  if (s[i] == '"') return TomlValue(parse_basic_string(s, i, line));
  if (s[i] == '[') return parse_array(s, i, line);
  const std::size_t start = i;
  while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != '#' && s[i] != ' ' && s[i] != '\t') {
    ++i;
  }
  return parse_scalar(s.substr(start, i - start), line);
}

}  // namespace

bool TomlValue::as_bool() const {
  if (!is_bool()) throw IoError("TOML: value is not a boolean");
  return std::get<bool>(value_);
}

std::int64_t TomlValue::as_int() const {
  if (!is_int()) throw IoError("TOML: value is not an integer");
  return std::get<std::int64_t>(value_);
}

double TomlValue::as_double() const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(value_));
  if (!is_float()) throw IoError("TOML: value is not a number");
  return std::get<double>(value_);
}

const std::string& TomlValue::as_string() const {
  if (!is_string()) throw IoError("TOML: value is not a string");
  return std::get<std::string>(value_);
}

const TomlValue::Array& TomlValue::as_array() const {
  if (!is_array()) throw IoError("TOML: value is not an array");
  return std::get<Array>(value_);
}

const TomlValue& TomlTable::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw IoError("TOML: missing key '" + key + "'");
  return it->second;
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? at(key).as_bool() : fallback;
}

std::int64_t TomlTable::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? at(key).as_int() : fallback;
}

double TomlTable::get_double(const std::string& key, double fallback) const {
  return has(key) ? at(key).as_double() : fallback;
}

std::string TomlTable::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? at(key).as_string() : fallback;
}

std::vector<double> TomlTable::get_double_array(const std::string& key) const {
  std::vector<double> out;
  if (!has(key)) return out;
  for (const auto& v : at(key).as_array()) out.push_back(v.as_double());
  return out;
}

std::vector<std::string> TomlTable::get_string_array(const std::string& key) const {
  std::vector<std::string> out;
  if (!has(key)) return out;
  for (const auto& v : at(key).as_array()) out.push_back(v.as_string());
  return out;
}

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::string prefix;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t i = 0;
    skip_ws(line, i);
    if (i >= line.size() || line[i] == '#') continue;

    if (line[i] == '[') {
      const std::size_t close = line.find(']', i);
      if (close == std::string::npos) fail(line_no, "unterminated table header");
      prefix = line.substr(i + 1, close - i - 1);
      if (prefix.empty() || !std::all_of(prefix.begin(), prefix.end(), key_char)) {
        fail(line_no, "bad table name '" + prefix + "'");
      }
      i = close + 1;
      skip_ws(line, i);
      if (i < line.size() && line[i] != '#') fail(line_no, "trailing content after table header");
      continue;
    }

    const std::size_t key_start = i;
    while (i < line.size() && key_char(line[i])) ++i;
    const std::string key = line.substr(key_start, i - key_start);
    if (key.empty()) fail(line_no, "expected a key");
    skip_ws(line, i);
    if (i >= line.size() || line[i] != '=') fail(line_no, "expected '=' after key '" + key + "'");
    ++i;
    TomlValue value = parse_value(line, i, line_no);
    skip_ws(line, i);
    if (i < line.size() && line[i] != '#') fail(line_no, "trailing content after value");

    table.set(prefix.empty() ? key : prefix + "." + key, std::move(value));
  }
  return table;
}

TomlTable load_toml(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open TOML file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str());
}

}  // namespace regdiff
