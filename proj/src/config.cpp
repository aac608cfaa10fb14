#include "dkm/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dkm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

}  // namespace

IniConfig IniConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

IniConfig IniConfig::parse_string(const std::string& text,
                                  const std::string& origin) {
  IniConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(origin + ": bad section header at line " +
                          std::to_string(lineno));
      section = lower(trim(t.substr(1, t.size() - 2)));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ": expected key = value at line " +
                        std::to_string(lineno));
    const std::string key = lower(trim(t.substr(0, eq)));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ": empty key at line " + std::to_string(lineno));
    cfg.values_[section][key] = value;
  }
  return cfg;
}

const std::string* IniConfig::find(const std::string& section,
                                   const std::string& key) const {
  const auto s = values_.find(lower(section));
  if (s == values_.end()) return nullptr;
  const auto k = s->second.find(lower(key));
  if (k == s->second.end()) return nullptr;
  consumed_.insert(lower(section) + "." + lower(key));
  return &k->second;
}

bool IniConfig::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

std::string IniConfig::get_string(const std::string& section,
                                  const std::string& key,
                                  const std::string& fallback) const {
  const std::string* v = find(section, key);
  return v ? *v : fallback;
}

std::string IniConfig::require_string(const std::string& section,
                                      const std::string& key) const {
  const std::string* v = find(section, key);
  if (!v)
    throw ConfigError(origin_ + ": missing required key [" + section + "] " + key);
  return *v;
}

int IniConfig::get_int(const std::string& section, const std::string& key,
                       int fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long val = std::stol(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return int(val);
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": [" + section + "] " + key +
                      " must be an integer, got '" + *v + "'");
  }
}

double IniConfig::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double val = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return val;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": [" + section + "] " + key +
                      " must be a real number, got '" + *v + "'");
  }
}

bool IniConfig::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  const std::string s = lower(*v);
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError(origin_ + ": [" + section + "] " + key +
                    " must be a boolean, got '" + *v + "'");
}

std::uint64_t IniConfig::get_u64(const std::string& section,
                                 const std::string& key,
                                 std::uint64_t fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const unsigned long long val = std::stoull(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return val;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": [" + section + "] " + key +
                      " must be a nonnegative integer, got '" + *v + "'");
  }
}

std::vector<double> IniConfig::get_list(
    const std::string& section, const std::string& key,
    const std::vector<double>& fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  std::vector<double> out;
  std::istringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(t, &used));
      if (used != t.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": [" + section + "] " + key +
                        " must be a comma-separated list of reals");
    }
  }
  if (out.empty())
    throw ConfigError(origin_ + ": [" + section + "] " + key + " is empty");
  return out;
}

std::vector<std::string> IniConfig::get_string_list(
    const std::string& section, const std::string& key,
    const std::vector<std::string>& fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  std::vector<std::string> out;
  std::istringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(lower(t));
  }
  if (out.empty())
    throw ConfigError(origin_ + ": [" + section + "] " + key + " is empty");
  return out;
}

void IniConfig::reject_unknown_keys() const {
  std::vector<std::string> unknown;
  for (const auto& [section, kv] : values_)
    for (const auto& [key, value] : kv) {
      (void)value;
      if (!consumed_.count(section + "." + key))
        unknown.push_back("[" + section + "] " + key);
    }
  if (!unknown.empty()) {
    std::string msg = origin_ + ": unknown config keys:";
    for (const auto& u : unknown) msg += " " + u + ";";
    throw ConfigError(msg);
  }
}

}  // namespace dkm
