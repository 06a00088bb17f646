#pragma once

// Experiment configuration: `key = value` text files, '#' comments, unknown
// keys rejected with line and field. The same reader backs the per-profile
// parameter files.

#include "glucoloop/baselines.hpp"
#include "glucoloop/esn.hpp"
#include "glucoloop/mealgen.hpp"
#include "glucoloop/patient.hpp"
#include "glucoloop/planner.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace glucoloop {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace detail

// Ordered key/value pairs with source line numbers; keys must be unique.
class KvFile {
public:
    struct Entry {
        int line = 0;
        std::string key;
        std::string value;
        mutable bool used = false;
    };

    static KvFile parse(std::istream& in, const std::string& origin) {
        KvFile kv;
        kv.origin_ = origin;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            // '#' opens a comment at line start or after whitespace; embedded
            // '#' (as in profile ids like adult#001) is data.
            std::size_t hash = std::string::npos;
            for (std::size_t i = 0; i < line.size(); ++i)
                if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
                    hash = i;
                    break;
                }
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = detail::trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
            Entry e;
            e.line = line_no;
            e.key = detail::trim(t.substr(0, eq));
            e.value = detail::trim(t.substr(eq + 1));
            if (e.key.empty())
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
            for (const auto& prev : kv.entries_)
                if (prev.key == e.key)
                    throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + e.key + "'");
            kv.entries_.push_back(std::move(e));
        }
        return kv;
    }

    static KvFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        return parse(in, path);
    }

    static KvFile parse_string(const std::string& text, const std::string& origin = "<config>") {
        std::istringstream in(text);
        return parse(in, origin);
    }

    bool has(const std::string& key) const {
        return find(key) != nullptr;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const Entry* e = find(key);
        return e ? e->value : fallback;
    }

    std::string require_string(const std::string& key) const {
        const Entry* e = find(key);
        if (!e) throw ConfigError(origin_ + ": missing required field '" + key + "'");
        return e->value;
    }

    double get_double(const std::string& key, double fallback) const {
        const Entry* e = find(key);
        if (!e) return fallback;
        return parse_double(*e);
    }

    long get_long(const std::string& key, long fallback) const {
        const Entry* e = find(key);
        if (!e) return fallback;
        const double v = parse_double(*e);
        const long r = static_cast<long>(v);
        if (static_cast<double>(r) != v)
            throw ConfigError(where(*e) + ": field '" + key + "' must be an integer, got '" + e->value + "'");
        return r;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const Entry* e = find(key);
        if (!e) return fallback;
        try {
            // stoull wraps negative input instead of rejecting it.
            if (e->value.find('-') != std::string::npos) throw std::invalid_argument("negative");
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("trailing garbage");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(where(*e) + ": field '" + key + "' must be a non-negative integer, got '" +
                              e->value + "'");
        }
    }

    std::vector<std::string> get_list(const std::string& key) const {
        const Entry* e = find(key);
        std::vector<std::string> out;
        if (!e) return out;
        std::stringstream ss(e->value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = detail::trim(item);
            if (!t.empty()) out.push_back(t);
        }
        if (out.empty()) throw ConfigError(where(*e) + ": field '" + key + "' is an empty list");
        return out;
    }

    void reject_unknown() const {
        for (const auto& e : entries_)
            if (!e.used)
                throw ConfigError(where(e) + ": unknown field '" + e.key + "'");
    }

    const std::string& origin() const { return origin_; }

private:
    const Entry* find(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.key == key) {
                e.used = true;
                return &e;
            }
        return nullptr;
    }

    double parse_double(const Entry& e) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("trailing garbage");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(where(e) + ": field '" + e.key + "' must be a number, got '" + e.value + "'");
        }
    }

    std::string where(const Entry& e) const { return origin_ + ":" + std::to_string(e.line); }

    std::string origin_;
    std::vector<Entry> entries_;
};

enum class AgentKind { bb, mbrl_with_uncertainty, mbrl_without_uncertainty };

inline const char* to_string(AgentKind k) {
    switch (k) {
        case AgentKind::bb: return "bb";
        case AgentKind::mbrl_with_uncertainty: return "mbrl_with_uncertainty";
        case AgentKind::mbrl_without_uncertainty: return "mbrl_without_uncertainty";
    }
    return "?";
}

inline AgentKind agent_kind_from(const std::string& s) {
    if (s == "bb") return AgentKind::bb;
    if (s == "mbrl_with_uncertainty") return AgentKind::mbrl_with_uncertainty;
    if (s == "mbrl_without_uncertainty") return AgentKind::mbrl_without_uncertainty;
    throw ConfigError("field 'agent' must be one of bb, mbrl_with_uncertainty, mbrl_without_uncertainty; got '" +
                      s + "'");
}

struct ExperimentConfig {
    std::string profile_id;
    std::string profile_file;  // optional; overrides the built-in profile registry
    AgentKind agent = AgentKind::bb;
    int episodes = 0;  // 0 = default for the agent kind (30 for bb, 200 for mbrl)
    std::uint64_t seed = 1;
    double cgm_noise_std = 0.0;
    double cgm_noise_correlation = 0.0;
    int horizon = kDefaultHorizon;
    int warmup_episodes = 5;
    int ensemble_members = 5;
    std::string output_dir = "out";
    EsnHyper esn;
    std::array<MealSpec, 6> meals = default_meal_specs();
    double bb_aggressiveness = 1.0;
    double bb_ref_bg = 130.0;
    // Direct BbParams overrides (otherwise derived from the profile).
    double bb_cr = 0.0;      // 0 = derive
    double bb_cf = 0.0;      // 0 = derive
    double bb_target = 120.0;
    // Multi-run fields (sweep / curves).
    std::vector<std::string> sweep_profiles;
    std::vector<AgentKind> sweep_agents;
    int curve_seeds = 5;

    int resolved_episodes() const {
        if (episodes > 0) return episodes;
        return agent == AgentKind::bb ? 30 : 200;
    }
};

// Parses an experiment config. `mode` widens the accepted key set for the
// sweep and curves subcommands.
enum class ConfigMode { run, sweep, curves };

inline ExperimentConfig parse_experiment_config(const KvFile& kv, ConfigMode mode = ConfigMode::run) {
    ExperimentConfig c;

    if (mode == ConfigMode::sweep) {
        for (const auto& p : kv.get_list("profiles")) c.sweep_profiles.push_back(p);
        for (const auto& a : kv.get_list("agents")) c.sweep_agents.push_back(agent_kind_from(a));
        if (c.sweep_profiles.empty())
            throw ConfigError(kv.origin() + ": missing required field 'profiles'");
        if (c.sweep_agents.empty())
            throw ConfigError(kv.origin() + ": missing required field 'agents'");
        c.profile_id = c.sweep_profiles.front();
        c.agent = c.sweep_agents.front();
    } else {
        c.profile_id = kv.require_string("profile_id");
        c.agent = agent_kind_from(kv.require_string("agent"));
    }
    if (mode == ConfigMode::curves) {
        c.curve_seeds = static_cast<int>(kv.get_long("seeds", 5));
        if (c.curve_seeds < 1) throw ConfigError(kv.origin() + ": field 'seeds' must be >= 1");
    }

    c.profile_file = kv.get_string("profile_file", "");
    c.episodes = static_cast<int>(kv.get_long("episodes", 0));
    if (kv.has("episodes") && c.episodes < 1)
        throw ConfigError(kv.origin() + ": field 'episodes' must be >= 1");
    c.seed = kv.get_u64("seed", 1);
    c.cgm_noise_std = kv.get_double("cgm_noise_std", 0.0);
    c.cgm_noise_correlation = kv.get_double("cgm_noise_correlation", 0.0);
    c.horizon = static_cast<int>(kv.get_long("horizon", kDefaultHorizon));
    if (c.horizon < 1) throw ConfigError(kv.origin() + ": field 'horizon' must be >= 1");
    c.warmup_episodes = static_cast<int>(kv.get_long("warmup_episodes", 5));
    if (c.warmup_episodes < 0) throw ConfigError(kv.origin() + ": field 'warmup_episodes' must be >= 0");
    c.ensemble_members = static_cast<int>(kv.get_long("ensemble_members", 5));
    if (c.ensemble_members < 1) throw ConfigError(kv.origin() + ": field 'ensemble_members' must be >= 1");
    c.output_dir = kv.get_string("output_dir", "out");

    c.esn.reservoir_size = static_cast<int>(kv.get_long("esn.reservoir_size", c.esn.reservoir_size));
    c.esn.leak_rate = kv.get_double("esn.leak_rate", c.esn.leak_rate);
    c.esn.spectral_radius = kv.get_double("esn.spectral_radius", c.esn.spectral_radius);
    c.esn.input_scale = kv.get_double("esn.input_scale", c.esn.input_scale);
    c.esn.connectivity = kv.get_double("esn.connectivity", c.esn.connectivity);
    c.esn.ridge_beta = kv.get_double("esn.ridge_beta", c.esn.ridge_beta);
    c.esn.washout = static_cast<int>(kv.get_long("esn.washout", c.esn.washout));

    static const char* kMealFields[] = {"probability", "lower_hour", "upper_hour", "mean_hour",
                                        "std_hour",    "mean_carbs", "std_carbs"};
    for (auto& spec : c.meals) {
        for (const char* field : kMealFields) {
            const std::string key = "meal." + spec.name + "." + field;
            if (!kv.has(key)) continue;
            const double v = kv.get_double(key, 0.0);
            if (std::string(field) == "probability") spec.probability = v;
            else if (std::string(field) == "lower_hour") spec.lower_hour = v;
            else if (std::string(field) == "upper_hour") spec.upper_hour = v;
            else if (std::string(field) == "mean_hour") spec.mean_hour = v;
            else if (std::string(field) == "std_hour") spec.std_hour = v;
            else if (std::string(field) == "mean_carbs") spec.mean_carbs_g = v;
            else spec.std_carbs_g = v;
        }
        try {
            spec.validate();
        } catch (const std::exception& e) {
            throw ConfigError(kv.origin() + ": " + e.what());
        }
    }

    c.bb_aggressiveness = kv.get_double("bb.aggressiveness", 1.0);
    c.bb_ref_bg = kv.get_double("bb.ref_bg", 130.0);
    c.bb_cr = kv.get_double("bb.cr", 0.0);
    c.bb_cf = kv.get_double("bb.cf", 0.0);
    c.bb_target = kv.get_double("bb.target", 120.0);

    try {
        c.esn.validate();
    } catch (const std::exception& e) {
        throw ConfigError(kv.origin() + ": " + e.what());
    }

    kv.reject_unknown();
    return c;
}

// Built-in registry: "adult#001" .. "child#003". Profile files extend this.
inline PatientParams profile_from_id(const std::string& profile_id) {
    const auto hash = profile_id.find('#');
    if (hash == std::string::npos)
        throw ConfigError("profile_id must look like 'adult#001', got '" + profile_id + "'");
    const std::string group_s = profile_id.substr(0, hash);
    const std::string index_s = profile_id.substr(hash + 1);
    AgeGroup group;
    if (group_s == "adult") group = AgeGroup::adult;
    else if (group_s == "adolescent") group = AgeGroup::adolescent;
    else if (group_s == "child") group = AgeGroup::child;
    else throw ConfigError("unknown age group '" + group_s + "' in profile_id '" + profile_id + "'");
    int index = 0;
    try {
        index = std::stoi(index_s);
    } catch (const std::exception&) {
        throw ConfigError("bad profile index in profile_id '" + profile_id + "'");
    }
    if (index < 1 || index > 3)
        throw ConfigError("profile index must be 1..3 in profile_id '" + profile_id + "'");
    return make_profile(group, index);
}

// Profile parameter file: physiology plus the Basal-Bolus therapy settings.
struct ProfileFile {
    PatientParams patient;
    BbParams bb;
};

inline ProfileFile parse_profile_file(const KvFile& kv) {
    ProfileFile p;
    p.patient.profile_id = kv.require_string("profile_id");
    p.patient.body_mass = kv.get_double("body_mass", p.patient.body_mass);
    p.patient.basal_rate = kv.get_double("basal_rate", p.patient.basal_rate);
    p.patient.insulin_sensitivity = kv.get_double("insulin_sensitivity", p.patient.insulin_sensitivity);
    p.patient.carb_absorption_rate = kv.get_double("carb_absorption_rate", p.patient.carb_absorption_rate);
    p.patient.insulin_action_rate = kv.get_double("insulin_action_rate", p.patient.insulin_action_rate);
    p.patient.insulin_clearance_rate = kv.get_double("insulin_clearance_rate", p.patient.insulin_clearance_rate);
    p.patient.glucose_self_regulation = kv.get_double("glucose_self_regulation", p.patient.glucose_self_regulation);
    p.patient.equilibrium_bg = kv.get_double("equilibrium_bg", p.patient.equilibrium_bg);
    p.patient.endogenous_production =
        kv.get_double("endogenous_production",
                      p.patient.glucose_self_regulation * p.patient.equilibrium_bg);
    p.bb.bas = p.patient.basal_rate;
    p.bb.cr = kv.get_double("bb.cr", 0.0);
    p.bb.cf = kv.get_double("bb.cf", 0.0);
    p.bb.b_tgt = kv.get_double("bb.target", 120.0);
    kv.reject_unknown();
    try {
        p.patient.validate();
        if (p.bb.cr != 0.0 || p.bb.cf != 0.0) p.bb.validate();
    } catch (const std::exception& e) {
        throw ConfigError(kv.origin() + ": " + e.what());
    }
    return p;
}

inline void write_profile_file(std::ostream& out, const PatientParams& p, const BbParams& bb) {
    out.precision(17);
    out << "profile_id = " << p.profile_id << "\n"
        << "body_mass = " << p.body_mass << "\n"
        << "basal_rate = " << p.basal_rate << "\n"
        << "insulin_sensitivity = " << p.insulin_sensitivity << "\n"
        << "carb_absorption_rate = " << p.carb_absorption_rate << "\n"
        << "insulin_action_rate = " << p.insulin_action_rate << "\n"
        << "insulin_clearance_rate = " << p.insulin_clearance_rate << "\n"
        << "glucose_self_regulation = " << p.glucose_self_regulation << "\n"
        << "equilibrium_bg = " << p.equilibrium_bg << "\n"
        << "endogenous_production = " << p.endogenous_production << "\n"
        << "bb.cr = " << bb.cr << "\n"
        << "bb.cf = " << bb.cf << "\n"
        << "bb.target = " << bb.b_tgt << "\n";
}

} // namespace glucoloop
