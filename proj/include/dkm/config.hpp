#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dkm/errors.hpp"

namespace dkm {

// Minimal INI-style config reader: [section] headers, key = value lines,
// '#' or ';' comments, UTF-8. Typed getters record which keys were read
// so unknown (misspelled) keys can be rejected afterwards.
class IniConfig {
 public:
  static IniConfig parse_file(const std::string& path);
  static IniConfig parse_string(const std::string& text,
                                const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  std::string require_string(const std::string& section,
                             const std::string& key) const;
  int get_int(const std::string& section, const std::string& key,
              int fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  // comma-separated list of reals
  std::vector<double> get_list(const std::string& section,
                               const std::string& key,
                               const std::vector<double>& fallback) const;
  std::vector<std::string> get_string_list(
      const std::string& section, const std::string& key,
      const std::vector<std::string>& fallback) const;

  // Throws ConfigError naming any key that was never consumed.
  void reject_unknown_keys() const;

  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  std::map<std::string, std::map<std::string, std::string>> values_;
  mutable std::set<std::string> consumed_;

  const std::string* find(const std::string& section,
                          const std::string& key) const;
};

}  // namespace dkm
