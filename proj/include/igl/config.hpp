#pragma once

#include <map>
#include <string>
#include <vector>

#include "igl/env.hpp"

namespace igl {

/// One parsed config value: scalar or flat array of scalars.
struct ConfigValue {
    enum class Kind { Bool, Number, String, Array };
    Kind kind = Kind::Number;
    bool boolean = false;
    double number = 0.0;
    std::string text;
    std::vector<ConfigValue> items; // for Kind::Array
};

/// Declarative key/value file with [section] tables, a small TOML subset:
/// bare or quoted keys, numbers, booleans, strings, single-line arrays,
/// comments with '#'. Key order within a section is preserved.
class ConfigDoc {
public:
    static ConfigDoc parse_file(const std::string& path);
    static ConfigDoc parse_string(const std::string& text, const std::string& origin);

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;
    /// Keys of a section in file order; empty when the section is absent.
    std::vector<std::string> keys(const std::string& section) const;

    double get_number(const std::string& section, const std::string& key) const;
    double get_number(const std::string& section, const std::string& key, double fallback) const;
    long long get_int(const std::string& section, const std::string& key) const;
    long long get_int(const std::string& section, const std::string& key, long long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::string get_string(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    std::vector<double> get_number_list(const std::string& section, const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& section,
                                             const std::string& key) const;

    void set(const std::string& section, const std::string& key, ConfigValue value);
    /// Serializes back to the same file format (used for config echoes).
    std::string dump() const;

private:
    const ConfigValue* find(const std::string& section, const std::string& key) const;
    const ConfigValue& require(const std::string& section, const std::string& key) const;

    std::string origin_;
    std::vector<std::string> section_order_;
    std::map<std::string, std::vector<std::pair<std::string, ConfigValue>>> sections_;
};

/// Builds an environment from the [env] tables of a config document.
/// Expects explicit transition / reward / channel / decoder tables keyed by
/// labels ("state:action", "context:state", "context:state:r", "context:symbol").
Env env_from_config(const ConfigDoc& doc);

} // namespace igl
