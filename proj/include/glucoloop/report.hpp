#pragma once

// Artifact writers and renderers: per-episode CSV logs, metrics JSON,
// learning-curve CSV, and the plain-text summary tables (controllers as
// columns, virtual people as rows).

#include "glucoloop/harness.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace glucoloop {

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

inline void write_episode_csv(std::ostream& out, const EpisodeLog& log) {
    out << "step,minute_of_day,true_bg,cgm,carbs_g,bolus_u,basal_u,cost,chosen_multiplier,termination\n";
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
        const StepRecord& s = log.steps[i];
        const bool last = i + 1 == log.steps.size();
        out << s.step << ',' << s.minute_of_day << ',' << format_fixed(s.true_bg, 6) << ','
            << format_fixed(s.cgm, 6) << ',' << format_fixed(s.carbs_g, 6) << ','
            << format_fixed(s.bolus_u, 6) << ',' << format_fixed(s.basal_u, 6) << ','
            << format_fixed(s.cost, 6) << ','
            << (s.chosen_multiplier ? format_fixed(*s.chosen_multiplier, 0) : "") << ','
            << (last ? to_string(log.termination) : "") << '\n';
    }
}

inline void write_episode_csv(const std::string& path, const EpisodeLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    write_episode_csv(out, log);
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline nlohmann::json metrics_to_json(const MetricsReport& m) {
    nlohmann::json j;
    j["profile_id"] = m.profile_id;
    j["agent"] = m.agent;
    j["seed"] = m.seed;
    j["episodes"] = m.episodes;
    j["warmup_episodes"] = m.warmup_episodes;
    j["eval_window"] = m.eval_window;
    j["eval_completed"] = m.eval_completed;
    j["completion_rate_pct"] = m.completion_rate_pct;
    if (m.tir_pct) j["tir_pct"] = *m.tir_pct;
    else j["tir_pct"] = nullptr;
    j["tir_episodes_used"] = m.tir_episodes_used;
    if (m.first_full_episode) j["first_full_episode"] = *m.first_full_episode;
    else j["first_full_episode"] = nullptr;
    j["episode_durations"] = m.episode_durations;
    j["episode_tir"] = m.episode_tir;
    j["episode_termination"] = m.episode_termination;
    return j;
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
    MetricsReport m;
    m.profile_id = j.at("profile_id").get<std::string>();
    m.agent = j.at("agent").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.episodes = j.at("episodes").get<int>();
    m.warmup_episodes = j.at("warmup_episodes").get<int>();
    m.eval_window = j.at("eval_window").get<int>();
    m.eval_completed = j.at("eval_completed").get<int>();
    m.completion_rate_pct = j.at("completion_rate_pct").get<double>();
    if (!j.at("tir_pct").is_null()) m.tir_pct = j.at("tir_pct").get<double>();
    m.tir_episodes_used = j.at("tir_episodes_used").get<int>();
    if (!j.at("first_full_episode").is_null()) m.first_full_episode = j.at("first_full_episode").get<int>();
    m.episode_durations = j.at("episode_durations").get<std::vector<int>>();
    m.episode_tir = j.at("episode_tir").get<std::vector<double>>();
    m.episode_termination = j.at("episode_termination").get<std::vector<std::string>>();
    return m;
}

inline void write_metrics_json(const std::string& path, const MetricsReport& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << metrics_to_json(m).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline MetricsReport read_metrics_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics file: " + path);
    nlohmann::json j;
    in >> j;
    return metrics_from_json(j);
}

// Two aligned text tables over a set of metrics reports: completion rate and
// time in range. Cells average across seeds when several reports share a
// (profile, agent) pair; TIR shows n/a when no underlying run completed an
// episode.
inline std::string render_tables(const std::vector<MetricsReport>& reports) {
    static const char* kAgents[] = {"bb", "mbrl_with_uncertainty", "mbrl_without_uncertainty"};
    static const char* kHeaders[] = {"BBController", "MBRL (with uncertainty)", "MBRL (without uncertainty)"};

    struct Cell {
        double completion_sum = 0.0;
        int completion_n = 0;
        double tir_sum = 0.0;
        int tir_n = 0;
        int runs = 0;
    };
    std::map<std::string, std::map<std::string, Cell>> rows;  // profile -> agent -> cell
    for (const auto& m : reports) {
        Cell& c = rows[m.profile_id][m.agent];
        c.completion_sum += m.completion_rate_pct;
        ++c.completion_n;
        if (m.tir_pct) {
            c.tir_sum += *m.tir_pct;
            ++c.tir_n;
        }
        ++c.runs;
    }

    bool used[3] = {false, false, false};
    for (const auto& [profile, agents] : rows)
        for (int a = 0; a < 3; ++a)
            if (agents.count(kAgents[a])) used[a] = true;

    std::size_t profile_w = std::string("profile").size();
    for (const auto& [profile, agents] : rows) profile_w = std::max(profile_w, profile.size());

    auto render = [&](const std::string& title, bool tir) {
        std::ostringstream out;
        out << title << '\n';
        out << std::left << std::setw(static_cast<int>(profile_w) + 2) << "profile";
        for (int a = 0; a < 3; ++a)
            if (used[a]) out << std::setw(static_cast<int>(std::string(kHeaders[a]).size()) + 2) << kHeaders[a];
        out << '\n';
        for (const auto& [profile, agents] : rows) {
            out << std::setw(static_cast<int>(profile_w) + 2) << profile;
            for (int a = 0; a < 3; ++a) {
                if (!used[a]) continue;
                std::string cell = "-";
                const auto it = agents.find(kAgents[a]);
                if (it != agents.end()) {
                    const Cell& c = it->second;
                    if (tir) cell = c.tir_n > 0 ? format_fixed(c.tir_sum / c.tir_n, 1) : "n/a";
                    else cell = format_fixed(c.completion_sum / std::max(1, c.completion_n), 1);
                }
                out << std::setw(static_cast<int>(std::string(kHeaders[a]).size()) + 2) << cell;
            }
            out << '\n';
        }
        return out.str();
    };

    std::string text = render("Episode completion rate (%, evaluation window)", false);
    text += '\n';
    text += render("Time in range 70-180 mg/dl (%, last 10 completed episodes)", true);
    return text;
}

inline void write_curves_csv(std::ostream& out, const CurvesResult& curves) {
    out << "mode,seed_index,seed,episode,duration_steps,tir_pct,termination\n";
    for (const auto& run : curves.runs) {
        for (std::size_t i = 0; i < run.metrics.episode_durations.size(); ++i) {
            out << to_string(run.mode) << ',' << run.seed_index << ',' << run.seed << ',' << (i + 1)
                << ',' << run.metrics.episode_durations[i] << ','
                << format_fixed(run.metrics.episode_tir[i], 6) << ','
                << run.metrics.episode_termination[i] << '\n';
        }
    }
}

inline nlohmann::json curves_summary_json(const CurvesResult& curves) {
    nlohmann::json j;
    j["episodes"] = curves.episodes;
    j["seeds"] = static_cast<int>(curves.runs.size() / 2);
    j["median_first_full_with_uncertainty"] = curves.median_first_full_with;
    j["median_first_full_without_uncertainty"] = curves.median_first_full_without;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : curves.runs) {
        nlohmann::json r;
        r["mode"] = to_string(run.mode);
        r["seed_index"] = run.seed_index;
        r["seed"] = run.seed;
        r["completion_rate_pct"] = run.metrics.completion_rate_pct;
        if (run.metrics.tir_pct) r["tir_pct"] = *run.metrics.tir_pct;
        else r["tir_pct"] = nullptr;
        if (run.metrics.first_full_episode) r["first_full_episode"] = *run.metrics.first_full_episode;
        else r["first_full_episode"] = nullptr;
        runs.push_back(r);
    }
    j["runs"] = runs;
    return j;
}

} // namespace glucoloop
