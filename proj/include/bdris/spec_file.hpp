// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bdris/config.hpp"
#include "bdris/error.hpp"
#include "bdris/harness.hpp"

#include <yaml-cpp/yaml.h>

#include <set>
#include <string>
#include <vector>

namespace bdris {

// Experiment spec files are YAML documents; see specs/README.md for the schema. Unknown keys
// are rejected so that typos never silently fall back to defaults.

namespace spec_detail {

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

inline void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed)
{
    if (!node.IsMap())
        fail(where + " must be a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key))
            fail("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get(const YAML::Node& node, const std::string& key, const T& fallback)
{
    const YAML::Node v = node[key];
    if (!v)
        return fallback;
    try {
        return v.as<T>();
    } catch (const YAML::Exception&) {
        fail("bad value for '" + key + "'");
    }
}

template <typename T>
std::vector<T> get_list(const YAML::Node& node, const std::string& key)
{
    const YAML::Node v = node[key];
    if (!v)
        return {};
    if (!v.IsSequence())
        fail("'" + key + "' must be a list");
    std::vector<T> out;
    try {
        for (const auto& x : v)
            out.push_back(x.as<T>());
    } catch (const YAML::Exception&) {
        fail("bad list entry in '" + key + "'");
    }
    return out;
}

inline SystemConfig parse_config(const YAML::Node& node)
{
    check_keys(node, "config",
               {"M", "N", "K", "U", "tx_power_dbm", "tx_power_w", "noise_dbm", "noise_variance_w", "noise_free", "theta",
                "pathloss", "pathloss_ur", "pathloss_rb", "pathloss_direct"});
    Dimensions d;
    d.M = get<int>(node, "M", 0);
    d.N = get<int>(node, "N", 0);
    d.K = get<int>(node, "K", 1);
    d.U = get<int>(node, "U", 1);
    if (d.M < 1 || d.N < 1 || d.K < 1 || d.U < 1)
        fail("config needs positive M, N, K, U");

    PathLossModel pl;
    if (const YAML::Node p = node["pathloss"]) {
        check_keys(p, "config.pathloss",
                   {"ref_gain_db", "ref_distance_m", "ur_distance_m", "ur_exponent", "rb_distance_m", "rb_exponent",
                    "direct_distance_m", "direct_exponent"});
        pl.ref_gain_db = get(p, "ref_gain_db", pl.ref_gain_db);
        pl.ref_distance_m = get(p, "ref_distance_m", pl.ref_distance_m);
        pl.ur_distance_m = get(p, "ur_distance_m", pl.ur_distance_m);
        pl.ur_exponent = get(p, "ur_exponent", pl.ur_exponent);
        pl.rb_distance_m = get(p, "rb_distance_m", pl.rb_distance_m);
        pl.rb_exponent = get(p, "rb_exponent", pl.rb_exponent);
        pl.direct_distance_m = get(p, "direct_distance_m", pl.direct_distance_m);
        pl.direct_exponent = get(p, "direct_exponent", pl.direct_exponent);
    }
    SystemConfig cfg = default_config(d, pl);
    if (node["tx_power_dbm"] && node["tx_power_w"])
        fail("give tx_power_dbm or tx_power_w, not both");
    if (node["tx_power_dbm"])
        cfg.tx_power = dbm_to_watt(get<double>(node, "tx_power_dbm", 0.0));
    if (node["tx_power_w"])
        cfg.tx_power = get<double>(node, "tx_power_w", 0.0);
    if (node["noise_dbm"] && node["noise_variance_w"])
        fail("give noise_dbm or noise_variance_w, not both");
    if (node["noise_dbm"])
        cfg.noise_variance = dbm_to_watt(get<double>(node, "noise_dbm", 0.0));
    if (node["noise_variance_w"])
        cfg.noise_variance = get<double>(node, "noise_variance_w", 0.0);
    if (get<bool>(node, "noise_free", false))
        cfg.noise_variance = 0.0;
    cfg.theta = get(node, "theta", cfg.theta);
    if (node["pathloss_ur"]) {
        const auto v = get_list<double>(node, "pathloss_ur");
        if (v.size() == 1)
            cfg.pathloss_ur.assign(static_cast<std::size_t>(d.K), v.front());
        else
            cfg.pathloss_ur = v;
    }
    cfg.pathloss_rb = get(node, "pathloss_rb", cfg.pathloss_rb);
    cfg.pathloss_direct = get(node, "pathloss_direct", cfg.pathloss_direct);
    return cfg;
}

}  // namespace spec_detail

inline ExperimentSpec parse_experiment_spec(const YAML::Node& root)
{
    using namespace spec_detail;
    check_keys(root, "spec",
               {"name", "seed", "trials", "tau", "rho", "rho_grid", "rho_calibration_trials", "estimators", "timing",
                "workers", "config", "sweep"});
    ExperimentSpec spec;
    spec.name = get<std::string>(root, "name", spec.name);
    if (spec.name.empty() || spec.name.find_first_of(",\n\r") != std::string::npos)
        fail("name must be non-empty and free of commas and newlines");
    spec.seed = get<std::uint64_t>(root, "seed", spec.seed);
    spec.trials = get<int>(root, "trials", spec.trials);
    spec.tau = get<int>(root, "tau", spec.tau);
    spec.timing = get<bool>(root, "timing", spec.timing);
    spec.workers = get<int>(root, "workers", spec.workers);
    spec.rho_calibration_trials = get<int>(root, "rho_calibration_trials", spec.rho_calibration_trials);
    if (root["rho_grid"])
        spec.rho_grid = get_list<double>(root, "rho_grid");
    if (const YAML::Node r = root["rho"]) {
        if (r.IsScalar() && r.Scalar() == "auto")
            spec.rho.reset();
        else
            spec.rho = get<double>(root, "rho", 0.0);
    }
    if (root["estimators"]) {
        spec.estimators.clear();
        for (const auto& e : get_list<std::string>(root, "estimators"))
            spec.estimators.push_back(parse_estimator(e));
    }
    if (!root["config"])
        fail("spec needs a config section");
    spec.base = parse_config(root["config"]);
    if (const YAML::Node s = root["sweep"]) {
        check_keys(s, "sweep", {"axis", "values"});
        spec.axis = parse_axis(get<std::string>(s, "axis", "none"));
        spec.values = get_list<double>(s, "values");
    }
    try {
        spec.validate();
    } catch (const Error& e) {
        fail(e.what());
    }
    return spec;
}

inline ExperimentSpec load_experiment_spec(const std::string& path)
{
    try {
        return parse_experiment_spec(YAML::LoadFile(path));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

inline ExperimentSpec parse_experiment_spec_text(const std::string& text)
{
    try {
        return parse_experiment_spec(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

/// Verification grid: lists of values per dimension, e.g. {M: [2, 3], N: [1, 2], K: [1], U: [1, 2]}.
inline std::vector<Dimensions> parse_verify_grid(const YAML::Node& root)
{
    using namespace spec_detail;
    check_keys(root, "grid", {"M", "N", "K", "U"});
    auto values = [&](const char* key) {
        auto v = get_list<int>(root, key);
        if (v.empty())
            fail(std::string("grid needs a non-empty list for ") + key);
        for (int x : v)
            if (x < 1)
                fail(std::string("grid values must be positive in ") + key);
        return v;
    };
    return dimension_grid(values("M"), values("N"), values("K"), values("U"));
}

inline std::vector<Dimensions> load_verify_grid(const std::string& path)
{
    try {
        return parse_verify_grid(YAML::LoadFile(path));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

}  // namespace bdris
