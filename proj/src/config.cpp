#include "igl/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "igl/errors.hpp"

namespace igl {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

ConfigValue parse_scalar(const std::string& raw, const std::string& where) {
    ConfigValue v;
    std::string s = trim(raw);
    if (s.empty()) throw ConfigError(where + ": empty value");
    if (s == "true" || s == "false") {
        v.kind = ConfigValue::Kind::Bool;
        v.boolean = s == "true";
        return v;
    }
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError(where + ": unterminated string");
        v.kind = ConfigValue::Kind::String;
        v.text = s.substr(1, s.size() - 2);
        return v;
    }
    char* end = nullptr;
    double num = std::strtod(s.c_str(), &end);
    if (end == s.c_str() + s.size()) {
        v.kind = ConfigValue::Kind::Number;
        v.number = num;
        return v;
    }
    throw ConfigError(where + ": cannot parse value '" + s + "'");
}

ConfigValue parse_value(const std::string& raw, const std::string& where) {
    std::string s = trim(raw);
    if (!s.empty() && s.front() == '[') {
        if (s.back() != ']') throw ConfigError(where + ": unterminated array");
        ConfigValue arr;
        arr.kind = ConfigValue::Kind::Array;
        std::string body = s.substr(1, s.size() - 2);
        std::string current;
        bool quoted = false;
        for (char ch : body) {
            if (ch == '"') quoted = !quoted;
            if (ch == ',' && !quoted) {
                if (!trim(current).empty())
                    arr.items.push_back(parse_scalar(current, where));
                current.clear();
            } else {
                current += ch;
            }
        }
        if (!trim(current).empty()) arr.items.push_back(parse_scalar(current, where));
        return arr;
    }
    return parse_scalar(s, where);
}

std::string format_value(const ConfigValue& v) {
    std::ostringstream out;
    switch (v.kind) {
        case ConfigValue::Kind::Bool:
            out << (v.boolean ? "true" : "false");
            break;
        case ConfigValue::Kind::Number: {
            std::ostringstream num;
            num.precision(17);
            num << v.number;
            out << num.str();
            break;
        }
        case ConfigValue::Kind::String:
            out << '"' << v.text << '"';
            break;
        case ConfigValue::Kind::Array: {
            out << '[';
            for (std::size_t i = 0; i < v.items.size(); ++i) {
                if (i) out << ", ";
                out << format_value(v.items[i]);
            }
            out << ']';
            break;
        }
    }
    return out.str();
}

bool key_needs_quotes(const std::string& key) {
    for (char c : key)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
            return true;
    return key.empty();
}

} // namespace

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

ConfigDoc ConfigDoc::parse_string(const std::string& text, const std::string& origin) {
    ConfigDoc doc;
    doc.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string where = origin + ":" + std::to_string(lineno);
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(where + ": malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            if (!doc.sections_.count(section)) {
                doc.section_order_.push_back(section);
                doc.sections_[section] = {};
            }
            continue;
        }
        std::string key;
        std::size_t pos = 0;
        if (s.front() == '"') {
            std::size_t close = s.find('"', 1);
            if (close == std::string::npos)
                throw ConfigError(where + ": unterminated quoted key");
            key = s.substr(1, close - 1);
            pos = close + 1;
        } else {
            pos = s.find('=');
            if (pos == std::string::npos)
                throw ConfigError(where + ": expected 'key = value'");
            key = trim(s.substr(0, pos));
        }
        std::size_t eq = s.find('=', pos);
        if (eq == std::string::npos) throw ConfigError(where + ": expected '='");
        if (key.empty()) throw ConfigError(where + ": empty key");
        ConfigValue value = parse_value(s.substr(eq + 1), where);
        if (!doc.sections_.count(section)) {
            doc.section_order_.push_back(section);
            doc.sections_[section] = {};
        }
        doc.set(section, key, std::move(value));
    }
    return doc;
}

bool ConfigDoc::has_section(const std::string& section) const {
    return sections_.count(section) > 0;
}

bool ConfigDoc::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::vector<std::string> ConfigDoc::keys(const std::string& section) const {
    std::vector<std::string> out;
    auto it = sections_.find(section);
    if (it == sections_.end()) return out;
    for (const auto& [k, v] : it->second) out.push_back(k);
    return out;
}

const ConfigValue* ConfigDoc::find(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return nullptr;
    for (const auto& [k, v] : it->second)
        if (k == key) return &v;
    return nullptr;
}

const ConfigValue& ConfigDoc::require(const std::string& section, const std::string& key) const {
    const ConfigValue* v = find(section, key);
    if (!v)
        throw ConfigError(origin_ + ": missing key '" + key + "' in section [" +
                          section + "]");
    return *v;
}

double ConfigDoc::get_number(const std::string& section, const std::string& key) const {
    const ConfigValue& v = require(section, key);
    if (v.kind != ConfigValue::Kind::Number)
        throw ConfigError(origin_ + ": key '" + key + "' must be a number");
    return v.number;
}

double ConfigDoc::get_number(const std::string& section, const std::string& key,
                             double fallback) const {
    return has(section, key) ? get_number(section, key) : fallback;
}

long long ConfigDoc::get_int(const std::string& section, const std::string& key) const {
    double v = get_number(section, key);
    long long n = static_cast<long long>(v);
    if (static_cast<double>(n) != v)
        throw ConfigError(origin_ + ": key '" + key + "' must be an integer");
    return n;
}

long long ConfigDoc::get_int(const std::string& section, const std::string& key,
                             long long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

bool ConfigDoc::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
    const ConfigValue* v = find(section, key);
    if (!v) return fallback;
    if (v->kind != ConfigValue::Kind::Bool)
        throw ConfigError(origin_ + ": key '" + key + "' must be a boolean");
    return v->boolean;
}

std::string ConfigDoc::get_string(const std::string& section, const std::string& key) const {
    const ConfigValue& v = require(section, key);
    if (v.kind != ConfigValue::Kind::String)
        throw ConfigError(origin_ + ": key '" + key + "' must be a string");
    return v.text;
}

std::string ConfigDoc::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
    return has(section, key) ? get_string(section, key) : fallback;
}

std::vector<double> ConfigDoc::get_number_list(const std::string& section,
                                               const std::string& key) const {
    const ConfigValue& v = require(section, key);
    if (v.kind != ConfigValue::Kind::Array)
        throw ConfigError(origin_ + ": key '" + key + "' must be an array");
    std::vector<double> out;
    for (const ConfigValue& item : v.items) {
        if (item.kind != ConfigValue::Kind::Number)
            throw ConfigError(origin_ + ": key '" + key + "' must hold numbers");
        out.push_back(item.number);
    }
    return out;
}

std::vector<std::string> ConfigDoc::get_string_list(const std::string& section,
                                                    const std::string& key) const {
    const ConfigValue& v = require(section, key);
    if (v.kind != ConfigValue::Kind::Array)
        throw ConfigError(origin_ + ": key '" + key + "' must be an array");
    std::vector<std::string> out;
    for (const ConfigValue& item : v.items) {
        if (item.kind != ConfigValue::Kind::String)
            throw ConfigError(origin_ + ": key '" + key + "' must hold strings");
        out.push_back(item.text);
    }
    return out;
}

void ConfigDoc::set(const std::string& section, const std::string& key, ConfigValue value) {
    if (!sections_.count(section)) {
        section_order_.push_back(section);
        sections_[section] = {};
    }
    for (auto& [k, v] : sections_[section])
        if (k == key) {
            v = std::move(value);
            return;
        }
    sections_[section].emplace_back(key, std::move(value));
}

std::string ConfigDoc::dump() const {
    std::ostringstream out;
    bool first = true;
    for (const std::string& name : section_order_) {
        if (!first) out << "\n";
        first = false;
        if (!name.empty()) out << "[" << name << "]\n";
        for (const auto& [key, value] : sections_.at(name)) {
            if (key_needs_quotes(key))
                out << '"' << key << '"';
            else
                out << key;
            out << " = " << format_value(value) << "\n";
        }
    }
    return out.str();
}

namespace {

std::vector<std::string> split_label(const std::string& key, char sep) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : key) {
        if (c == sep) {
            parts.push_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    parts.push_back(trim(current));
    return parts;
}

int label_index(const std::vector<std::string>& labels, const std::string& label,
                const std::string& what) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    throw ConfigError("unknown " + what + " label '" + label + "'");
}

} // namespace

Env env_from_config(const ConfigDoc& doc) {
    Env env;
    env.name = doc.get_string("env", "name", "custom");

    env.action_labels = doc.get_string_list("env", "actions");
    env.contexts.labels = doc.get_string_list("env", "contexts");
    env.contexts.distribution = doc.get_number_list("env", "context_weights");

    std::vector<std::string> layer_specs = doc.get_string_list("env", "layers");
    auto& mdp = env.mdp;
    mdp.horizon = static_cast<int>(layer_specs.size());
    mdp.action_count = static_cast<int>(env.action_labels.size());
    int id = 0;
    for (const std::string& spec : layer_specs) {
        std::vector<int> layer;
        std::istringstream in(spec);
        std::string label;
        while (in >> label) {
            env.state_labels.push_back(label);
            layer.push_back(id++);
        }
        if (layer.empty()) throw ConfigError("empty layer in env config");
        mdp.layers.push_back(layer);
    }
    const int S = id;
    const int K = mdp.action_count;
    mdp.index_layers();

    mdp.transition.assign(S, {});
    for (int s = 0; s < S; ++s)
        if (!mdp.is_terminal(s)) mdp.transition[s].assign(K, Vec());
    for (const std::string& key : doc.keys("env.transition")) {
        auto parts = split_label(key, ':');
        if (parts.size() != 2)
            throw ConfigError("transition key must be 'state:action', got '" + key + "'");
        int s = label_index(env.state_labels, parts[0], "state");
        int a = label_index(env.action_labels, parts[1], "action");
        if (env.mdp.is_terminal(s))
            throw ConfigError("transition row given for terminal state '" + parts[0] + "'");
        mdp.transition[s][a] = doc.get_number_list("env.transition", key);
    }

    auto& fb = env.feedback;
    fb.alphabet_labels = doc.get_string_list("env", "feedback_alphabet");
    fb.alphabet_size = static_cast<int>(fb.alphabet_labels.size());
    const int C = env.contexts.count();
    const int Y = fb.alphabet_size;

    fb.reward_fn.assign(C, std::vector<Vec>(S, Vec(K, 0.0)));
    for (const std::string& key : doc.keys("env.reward")) {
        auto parts = split_label(key, ':');
        if (parts.size() != 2)
            throw ConfigError("reward key must be 'context:state', got '" + key + "'");
        int x = label_index(env.contexts.labels, parts[0], "context");
        int s = label_index(env.state_labels, parts[1], "state");
        fb.reward_fn[x][s] = doc.get_number_list("env.reward", key);
    }

    fb.channel.assign(C, std::vector<std::array<Vec, 2>>(S, {Vec(), Vec()}));
    for (int x = 0; x < C; ++x)
        for (int s = 0; s < S; ++s) {
            Vec unit(Y, 0.0);
            unit[0] = 1.0;
            fb.channel[x][s] = {unit, unit};
        }
    for (const std::string& key : doc.keys("env.channel")) {
        auto parts = split_label(key, ':');
        if (parts.size() != 3)
            throw ConfigError("channel key must be 'context:state:r', got '" + key + "'");
        int x = label_index(env.contexts.labels, parts[0], "context");
        int s = label_index(env.state_labels, parts[1], "state");
        int r = std::stoi(parts[2]);
        if (r != 0 && r != 1) throw ConfigError("channel reward bit must be 0 or 1");
        fb.channel[x][s][r] = doc.get_number_list("env.channel", key);
    }

    fb.decoder.assign(C, std::vector<std::vector<int>>(Y, std::vector<int>(S, 0)));
    for (const std::string& key : doc.keys("env.decoder")) {
        auto parts = split_label(key, ':');
        if (parts.size() != 2)
            throw ConfigError("decoder key must be 'context:symbol', got '" + key + "'");
        int x = label_index(env.contexts.labels, parts[0], "context");
        int y = label_index(fb.alphabet_labels, parts[1], "feedback symbol");
        Vec values = doc.get_number_list("env.decoder", key);
        if (static_cast<int>(values.size()) != S)
            throw ConfigError("decoder row '" + key + "' must list one bit per state");
        for (int s = 0; s < S; ++s) {
            if (values[s] != 0.0 && values[s] != 1.0)
                throw ConfigError("decoder values must be 0 or 1");
            fb.decoder[x][y][s] = static_cast<int>(values[s]);
        }
    }

    env.ident.M = doc.get_number("env", "M");
    env.ident.theta = doc.get_number("env", "theta");
    env.ident.c = doc.get_number("env", "c");

    try {
        env.validate();
    } catch (const EnvSpecError& e) {
        throw ConfigError(std::string("invalid env config: ") + e.what());
    }
    return env;
}

} // namespace igl
