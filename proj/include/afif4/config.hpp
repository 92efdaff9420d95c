#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "afif4/error.hpp"

namespace afif4 {

// Flat key=value configuration. Every tunable default of the pipeline
// has a key here; unknown keys are rejected so typos surface early.
struct Config {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
    double get_double(const std::string& key, double fallback) const {
        const auto it = values.find(key);
        if (it == values.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw Error("config key '" + key + "': bad numeric value '" + it->second + "'");
        }
    }
    int get_int(const std::string& key, int fallback) const {
        const double v = get_double(key, fallback);
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw Error("config key '" + key + "': expected an integer");
        return i;
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const auto it = values.find(key);
        if (it == values.end()) return fallback;
        try {
            std::size_t used = 0;
            const std::uint64_t v = std::stoull(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw Error("config key '" + key + "': bad unsigned value '" + it->second + "'");
        }
    }
};

inline const std::map<std::string, std::string>& config_defaults() {
    static const std::map<std::string, std::string> defaults = {
        {"seed", "1"},
        {"preset", "afif4-tiny"},
        {"channels", "1"},
        {"patch.margin", "1.5"},
        {"patch.min_box", "8"},
        {"patch.size", "0"},  // 0 = network input size
        {"ssr.g", "0"},       // 0 = max(width, height) / 4
        {"ssr.eps", "0.00392156862745098"},
        {"membrane.method", "cg"},
        {"membrane.tolerance", "1e-6"},
        {"membrane.max_iterations", "10000"},
        {"train.learning_rate", "0.01"},
        {"train.iterations", "1000"},
        {"train.batch_size", "8"},
        {"train.init_scale", "1.0"},
        {"adaboost.rounds", "50"},
        {"lda.shrinkage", "0.1"},
        {"augment.shift", "5"},
        {"degrade.fill", "0.5"},
        {"folds.k", "5"},
        {"detector.command", ""},  // empty = manifest landmarks
    };
    return defaults;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    std::size_t b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace detail

inline Config parse_config_stream(std::istream& in, const std::string& origin) {
    Config cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw Error(origin + " line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty())
            throw Error(origin + " line " + std::to_string(line_no) + ": empty key");
        if (!config_defaults().count(key))
            throw Error(origin + " line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        cfg.values[key] = value;
    }
    return cfg;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    return parse_config_stream(in, path);
}

}  // namespace afif4
