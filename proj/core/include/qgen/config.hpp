#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qgen {

// Raised on malformed config files or unknown keys; the CLI maps it to
// exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key=value store. Keys are unique; later assignments overwrite, which
// gives the CLI-flag-over-file precedence for free.
class KvConfig {
 public:
  static KvConfig from_file(const std::string& path);
  static KvConfig from_text(std::string_view text);

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

  // Canonical text: sorted key=value lines. Identical configs hash equal.
  std::string canonical_text() const;
  std::string hash_hex() const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace qgen
