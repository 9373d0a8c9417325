#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qexp {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat `section.key -> value` settings read from an INI file. Later sources
/// (environment, command-line flags) override earlier ones through set().
class Config {
public:
    /// Relative path values in the file are resolved against its directory.
    static Config load(const std::filesystem::path& path);

    void set(const std::string& key, std::string value);
    bool has(const std::string& key) const { return values_.contains(key); }
    std::optional<std::string> get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::filesystem::path get_path(const std::string& key, const std::filesystem::path& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated list; empty items dropped.
    std::vector<std::string> get_list(const std::string& key) const;

    /// `key=value` lines, sorted, for keys under any of the given sections
    /// (all keys when `sections` is empty).
    std::string canonical(const std::vector<std::string>& sections = {}) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    std::filesystem::path base_dir_;
};

/// 64-bit FNV-1a, printed as 16 hex digits by hex64.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
/// FNV-1a of a file's bytes; throws if unreadable.
std::uint64_t hash_file(const std::filesystem::path& path);

}  // namespace qexp
