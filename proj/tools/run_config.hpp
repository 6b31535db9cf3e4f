#pragma once

// Effective run configuration: built-in defaults, overlaid by a JSON config
// file, then ADIS_THREADS, then explicit command-line flags. Unknown keys
// and type mismatches are rejected before anything runs.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "adis/error.hpp"

namespace adis::cli {

using nlohmann::json;

inline int default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

inline int threads_from_env() {
    const char* v = std::getenv("ADIS_THREADS");
    if (!v || !*v) return 0;
    char* end = nullptr;
    const long t = std::strtol(v, &end, 10);
    if (*end != '\0' || t < 1 || t > 4096)
        throw ArgumentError("ADIS_THREADS must be a positive integer, got '" + std::string(v) + "'");
    return static_cast<int>(t);
}

namespace detail {
// Type class of a default value; null defaults accept integers (optional ints).
inline bool compatible(const json& def, const json& v) {
    if (def.is_null()) return v.is_null() || v.is_number_integer();
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_number_integer()) return v.is_number_integer();
    if (def.is_number()) return v.is_number();
    if (def.is_string()) return v.is_string();
    if (def.is_array()) return v.is_array();
    return false;
}

inline std::string type_name(const json& def) {
    if (def.is_null()) return "integer or null";
    if (def.is_boolean()) return "boolean";
    if (def.is_number_integer()) return "integer";
    if (def.is_number()) return "number";
    if (def.is_string()) return "string";
    return "array";
}
}  // namespace detail

class RunConfig {
public:
    RunConfig(std::string subcommand, json defaults)
        : subcommand_(std::move(subcommand)), cfg_(std::move(defaults)) {}

    template <typename T>
    CLI::Option* option(CLI::App* app, const std::string& flags, const std::string& key,
                        const std::string& help) {
        check_key(key);
        auto holder = std::make_shared<T>();
        CLI::Option* opt = app->add_option(flags, *holder, help);
        binds_.push_back([opt, holder, key](json& j) {
            if (opt->count() > 0) j[key] = *holder;
        });
        return opt;
    }

    void config_option(CLI::App* app) {
        app->add_option("--config", config_path_, "JSON config file or a previous manifest.json");
    }

    /// Applies config file, environment and flags, then validates.
    const json& resolve() {
        if (!config_path_.empty()) merge_file(config_path_);
        if (cfg_.contains("threads")) {
            if (const int t = threads_from_env()) cfg_["threads"] = t;
        }
        for (auto& b : binds_) b(cfg_);
        return cfg_;
    }

    const json& get() const { return cfg_; }
    const std::string& subcommand() const { return subcommand_; }

private:
    void check_key(const std::string& key) const {
        if (!cfg_.contains(key)) throw std::logic_error("flag bound to unknown config key " + key);
    }

    void merge_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw IoError("config: cannot open " + path);
        json doc;
        try {
            doc = json::parse(is);
        } catch (const json::exception& e) {
            throw ArgumentError("config: " + path + " is not valid JSON: " + e.what());
        }
        if (!doc.is_object()) throw ArgumentError("config: top level must be an object");
        // A manifest carries the effective config of an earlier run.
        if (doc.contains("manifest_version")) {
            if (doc.value("subcommand", "") != subcommand_)
                throw ArgumentError("config: manifest is for '" + doc.value("subcommand", "") + "', not '" +
                                    subcommand_ + "'");
            doc = doc.at("config");
        }
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            if (!cfg_.contains(it.key()))
                throw ArgumentError("config: unknown key '" + it.key() + "' for " + subcommand_);
            if (!detail::compatible(cfg_[it.key()], it.value()))
                throw ArgumentError("config: key '" + it.key() + "' must be " +
                                    detail::type_name(cfg_[it.key()]));
            cfg_[it.key()] = it.value();
        }
    }

    std::string subcommand_;
    json cfg_;
    std::string config_path_;
    std::vector<std::function<void(json&)>> binds_;
};

}  // namespace adis::cli
