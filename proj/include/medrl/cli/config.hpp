#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace medrl {

/// Flat dotted-key configuration ("section.key = value" lines, '#'
/// comments). A full default set covers every tunable; file values and
/// command-line overrides are merged on top. The config hash covers every
/// semantically relevant key (output paths excluded), so identical hashes
/// mean identical runs.
class ConfigMap {
 public:
  static ConfigMap defaults();
  static ConfigMap from_file(const std::string& path);

  /// Defaults, overlaid with the file (when nonempty), overlaid with
  /// key=value override strings. Unknown keys are rejected.
  static ConfigMap resolve(const std::string& file_path, const std::vector<std::string>& overrides);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);
  void merge(const ConfigMap& overrides);

  const std::string& get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  const std::map<std::string, std::string>& items() const { return values_; }

  /// FNV-1a 64 over the sorted semantic key=value pairs, hex-encoded.
  std::string hash() const;

  /// Cross-field invariants (schema names, precision mode, tau vs T, ...).
  void validate() const;

  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace medrl
