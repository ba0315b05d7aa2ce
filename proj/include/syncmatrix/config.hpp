#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace syncmatrix {

/// Layered key=value configuration: INI-style file with [section] headers,
/// overridable by --section.key=value flags; getter defaults fill the rest.
/// Keys are validated against the known-key registry — a typo is an error,
/// not a silent no-op. Every value a command actually reads is recorded so
/// the run can emit a resolved copy of its effective configuration.
class RunConfig {
public:
    RunConfig() = default;
    static RunConfig from_file(const std::string& path);

    /// dotted is "section.key"; later overrides win.
    void set(const std::string& dotted, const std::string& value);

    bool has(const std::string& dotted) const;

    std::string get_string(const std::string& dotted, const std::string& fallback) const;
    std::string require_string(const std::string& dotted) const;
    double get_double(const std::string& dotted, double fallback) const;
    std::int64_t get_int(const std::string& dotted, std::int64_t fallback) const;
    std::size_t get_size(const std::string& dotted, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& dotted, std::uint64_t fallback) const;
    bool get_bool(const std::string& dotted, bool fallback) const;
    /// Comma-separated list values.
    std::vector<std::string> get_list(const std::string& dotted,
                                      const std::vector<std::string>& fallback) const;

    /// Writes every key this run resolved (read or set), sorted, as INI.
    void write_resolved(const std::string& path) const;

private:
    void validate_key(const std::string& dotted) const;

    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> resolved_;
};

}  // namespace syncmatrix
