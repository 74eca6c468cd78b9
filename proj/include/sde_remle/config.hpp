#pragma once

// Flat `key = value` run configuration with line-numbered errors.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sde_remle/error.hpp"
#include "sde_remle/text.hpp"

namespace sde_remle {

enum class KeyKind { real, count, count_list, text };

inline const std::map<std::string, KeyKind, std::less<>>& config_keys() {
  static const std::map<std::string, KeyKind, std::less<>> keys{
      {"model", KeyKind::text},
      {"design", KeyKind::text},
      {"input", KeyKind::text},
      {"output_dir", KeyKind::text},
      {"mu0", KeyKind::real},
      {"omega2_0", KeyKind::real},
      {"mu_alt", KeyKind::real},
      {"omega2_alt", KeyKind::real},
      {"mu_lo", KeyKind::real},
      {"mu_hi", KeyKind::real},
      {"omega2_lo", KeyKind::real},
      {"omega2_hi", KeyKind::real},
      {"x0", KeyKind::real},
      {"T", KeyKind::real},
      {"x_inf", KeyKind::real},
      {"T_inf", KeyKind::real},
      {"design_a", KeyKind::real},
      {"design_b", KeyKind::real},
      {"dt", KeyKind::real},
      {"psi", KeyKind::real},
      {"xi", KeyKind::real},
      {"n", KeyKind::count},
      {"seed", KeyKind::count},
      {"replicates", KeyKind::count},
      {"info_replicates", KeyKind::count},
      {"audit_grid", KeyKind::count},
      {"n_schedule", KeyKind::count_list},
      {"limit_schedule", KeyKind::count_list},
      {"m_schedule", KeyKind::count_list},
      {"powers", KeyKind::count_list},
  };
  return keys;
}

class RunConfig {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static RunConfig parse(std::string_view text) {
    RunConfig cfg;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto end = text.find('\n', start);
      std::string_view line = text.substr(
          start, end == std::string_view::npos ? std::string_view::npos : end - start);
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string_view::npos)
        line = line.substr(0, hash);
      line = trim(line);
      if (!line.empty()) cfg.parse_line(line, lineno);
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    return cfg;
  }

  bool has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

  void set(const std::string& key, std::string value) {
    validate_value(key, value, 0);
    entries_[key] = {std::move(value), 0};
  }

  void require(std::initializer_list<std::string_view> keys) const {
    for (auto k : keys)
      if (!has(k)) throw MissingKey("missing required key '" + std::string(k) + "'", 0);
  }

  std::string text(std::string_view key) const { return entry(key).value; }
  std::string text_or(std::string_view key, std::string fallback) const {
    return has(key) ? text(key) : std::move(fallback);
  }

  double real(std::string_view key) const {
    double v = 0.0;
    parse_double(entry(key).value, v);
    return v;
  }
  double real_or(std::string_view key, double fallback) const {
    return has(key) ? real(key) : fallback;
  }

  std::uint64_t count(std::string_view key) const {
    std::uint64_t v = 0;
    parse_uint(entry(key).value, v);
    return v;
  }
  std::uint64_t count_or(std::string_view key, std::uint64_t fallback) const {
    return has(key) ? count(key) : fallback;
  }

  std::vector<std::uint64_t> counts(std::string_view key) const {
    std::vector<std::uint64_t> out;
    for (auto item : split(entry(key).value, ',')) {
      std::uint64_t v = 0;
      parse_uint(trim(item), v);
      out.push_back(v);
    }
    return out;
  }
  std::vector<std::uint64_t> counts_or(std::string_view key,
                                       std::vector<std::uint64_t> fallback) const {
    return has(key) ? counts(key) : std::move(fallback);
  }

  std::size_t line_of(std::string_view key) const { return entry(key).line; }

  /// Keys in sorted order, one `key = value` line each.
  std::string canonical() const {
    std::ostringstream os;
    for (const auto& [k, e] : entries_) os << k << " = " << e.value << '\n';
    return os.str();
  }

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (const auto& [k, e] : a.entries_) {
      const auto it = b.entries_.find(k);
      if (it == b.entries_.end() || it->second.value != e.value) return false;
    }
    return true;
  }

 private:
  const Entry& entry(std::string_view key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
      throw MissingKey("missing required key '" + std::string(key) + "'", 0);
    return it->second;
  }

  static void validate_value(std::string_view key, std::string_view value,
                             std::size_t lineno) {
    const auto it = config_keys().find(key);
    if (it == config_keys().end())
      throw UnknownKey("unknown key '" + std::string(key) + "'", lineno);
    const std::string where = "key '" + std::string(key) + "': ";
    switch (it->second) {
      case KeyKind::real: {
        double v = 0.0;
        if (!parse_double(value, v) || !std::isfinite(v))
          throw ParseError(where + "expected a decimal real, got '" +
                               std::string(value) + "'",
                           lineno);
        break;
      }
      case KeyKind::count: {
        std::uint64_t v = 0;
        if (!parse_uint(value, v))
          throw ParseError(where + "expected a non-negative integer, got '" +
                               std::string(value) + "'",
                           lineno);
        break;
      }
      case KeyKind::count_list:
        for (auto item : split(value, ',')) {
          std::uint64_t v = 0;
          if (!parse_uint(trim(item), v))
            throw ParseError(where + "expected a comma-separated list of "
                                     "non-negative integers, got '" +
                                 std::string(value) + "'",
                             lineno);
        }
        break;
      case KeyKind::text:
        break;
    }
  }

  void parse_line(std::string_view line, std::size_t lineno) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected 'key = value'", lineno);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", lineno);
    if (value.empty())
      throw ParseError("empty value for key '" + std::string(key) + "'", lineno);
    validate_value(key, value, lineno);
    if (has(key))
      throw ParseError("duplicate key '" + std::string(key) + "' (first on line " +
                           std::to_string(line_of(key)) + ")",
                       lineno);
    entries_.emplace(std::string(key), Entry{std::string(value), lineno});
  }

  std::map<std::string, Entry, std::less<>> entries_;
};

inline RunConfig parse_config(std::string_view text) { return RunConfig::parse(text); }

/// Seed precedence: explicit override, then the config's `seed`, then the
/// SDE_REMLE_SEED environment variable, then 0.
inline std::uint64_t resolve_seed(const RunConfig& cfg,
                                  std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  if (cfg.has("seed")) return cfg.count("seed");
  if (const char* env = std::getenv("SDE_REMLE_SEED")) {
    std::uint64_t v = 0;
    if (!parse_uint(trim(env), v))
      throw ParseError("SDE_REMLE_SEED is not a non-negative integer", 0);
    return v;
  }
  return 0;
}

}  // namespace sde_remle
