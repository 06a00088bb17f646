#pragma once

// Episode loop and experiment orchestration. An episode is 24 hours from
// 06:00 in 288 five-minute steps: announce carbs, ask the agent for a bolus,
// deliver basal + bolus, integrate the patient, read the CGM, log, and stop
// early if the true BG leaves [20, 600] mg/dl. Termination is judged on true
// BG; time-in-range is judged on the CGM signal the agent actually sees.

#include "glucoloop/agents.hpp"
#include "glucoloop/config.hpp"
#include "glucoloop/mealgen.hpp"
#include "glucoloop/patient.hpp"
#include "glucoloop/risk.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace glucoloop {

enum class Termination { completed, hypo_terminated, hyper_terminated, aborted };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::completed: return "completed";
        case Termination::hypo_terminated: return "hypo_terminated";
        case Termination::hyper_terminated: return "hyper_terminated";
        case Termination::aborted: return "aborted";
    }
    return "?";
}

inline constexpr double kHypoTerminationBg = 20.0;
inline constexpr double kHyperTerminationBg = 600.0;
inline constexpr double kRangeLowBg = 70.0;
inline constexpr double kRangeHighBg = 180.0;

struct StepRecord {
    int step = 0;
    int minute_of_day = 0;  // wall-clock minute at step start, wraps past midnight
    double true_bg = 0.0;   // after the step
    double cgm = 0.0;       // after the step
    double carbs_g = 0.0;
    double bolus_u = 0.0;   // agent dose on top of basal (may be negative down to -basal)
    double basal_u = 0.0;
    double cost = 0.0;      // risk of the post-step CGM reading
    std::optional<double> chosen_multiplier;  // planning agents only
};

struct EpisodeLog {
    std::vector<StepRecord> steps;
    Termination termination = Termination::completed;
    int duration_steps = 0;
    std::string diagnostic;  // set when termination == aborted

    bool completed() const { return termination == Termination::completed; }

    // Percentage of logged steps with CGM inside [70, 180] mg/dl.
    double tir_pct() const {
        if (steps.empty()) return 0.0;
        int in = 0;
        for (const auto& s : steps)
            if (s.cgm >= kRangeLowBg && s.cgm <= kRangeHighBg) ++in;
        return 100.0 * in / static_cast<double>(steps.size());
    }
};

inline int minute_of_day(int step) {
    return (static_cast<int>(kEpisodeStartHour) * 60 + step * static_cast<int>(kStepMinutes)) % 1440;
}

// One 24-hour episode against a pre-sampled carb schedule. The agent returns
// a bolus on top of basal each step; total delivery must stay >= 0.
inline EpisodeLog run_episode(Agent& agent, const PatientParams& patient,
                              const std::vector<double>& carb_schedule, CgmSensor& sensor) {
    if (static_cast<int>(carb_schedule.size()) != kStepsPerDay)
        throw std::invalid_argument("run_episode: carb schedule must cover all steps");

    PatientState state = steady_state(patient);
    double cgm = sensor.read(state.plasma_glucose);
    agent.begin_episode(cgm);

    EpisodeLog log;
    log.steps.reserve(static_cast<std::size_t>(kStepsPerDay));
    double insulin_prev = 0.0;
    for (int t = 0; t < kStepsPerDay; ++t) {
        const double carbs = carb_schedule[static_cast<std::size_t>(t)];
        const double bolus = agent.observe(cgm, carbs, insulin_prev);
        const double total = patient.basal_rate + bolus;
        if (!(total >= 0.0) || !std::isfinite(total)) {
            log.termination = Termination::aborted;
            log.diagnostic = "agent requested negative total insulin at step " + std::to_string(t);
            break;
        }

        StepResult r;
        try {
            r = step_patient(state, patient, total, carbs);
        } catch (const std::exception& e) {
            log.termination = Termination::aborted;
            log.diagnostic = std::string("simulation failure at step ") + std::to_string(t) + ": " + e.what();
            break;
        }
        state = r.state;
        cgm = sensor.read(r.true_bg);

        StepRecord rec;
        rec.step = t;
        rec.minute_of_day = minute_of_day(t);
        rec.true_bg = r.true_bg;
        rec.cgm = cgm;
        rec.carbs_g = carbs;
        rec.bolus_u = bolus;
        rec.basal_u = patient.basal_rate;
        rec.cost = risk(clamp_bg(cgm));
        rec.chosen_multiplier = agent.last_chosen_multiplier();
        log.steps.push_back(rec);
        insulin_prev = total;

        if (r.true_bg < kHypoTerminationBg) {
            log.termination = Termination::hypo_terminated;
            break;
        }
        if (r.true_bg > kHyperTerminationBg) {
            log.termination = Termination::hyper_terminated;
            break;
        }
    }
    agent.end_episode(cgm);
    log.duration_steps = static_cast<int>(log.steps.size());
    return log;
}

struct MetricsReport {
    std::string profile_id;
    std::string agent;
    std::uint64_t seed = 0;
    int episodes = 0;
    int warmup_episodes = 0;
    int eval_window = 0;        // last min(30, episodes) episodes
    int eval_completed = 0;
    double completion_rate_pct = 0.0;
    std::optional<double> tir_pct;  // absent when no episode completed
    int tir_episodes_used = 0;
    std::optional<int> first_full_episode;  // 1-based; planners: first full episode after warmup
    std::vector<int> episode_durations;
    std::vector<double> episode_tir;
    std::vector<std::string> episode_termination;
};

inline MetricsReport compute_metrics(const std::vector<EpisodeLog>& logs, const std::string& profile_id,
                                     AgentKind agent, std::uint64_t seed, int warmup_episodes) {
    MetricsReport m;
    m.profile_id = profile_id;
    m.agent = to_string(agent);
    m.seed = seed;
    m.episodes = static_cast<int>(logs.size());
    m.warmup_episodes = agent == AgentKind::bb ? 0 : warmup_episodes;

    m.episode_durations.reserve(logs.size());
    for (const auto& log : logs) {
        m.episode_durations.push_back(log.duration_steps);
        m.episode_tir.push_back(log.tir_pct());
        m.episode_termination.emplace_back(to_string(log.termination));
    }

    m.eval_window = std::min(30, m.episodes);
    const int eval_begin = m.episodes - m.eval_window;
    for (int i = eval_begin; i < m.episodes; ++i)
        if (logs[static_cast<std::size_t>(i)].completed()) ++m.eval_completed;
    m.completion_rate_pct =
        m.eval_window > 0 ? 100.0 * m.eval_completed / static_cast<double>(m.eval_window) : 0.0;

    // Mean TIR over the last (up to) 10 completed episodes.
    std::vector<double> tirs;
    for (int i = m.episodes - 1; i >= 0 && static_cast<int>(tirs.size()) < 10; --i)
        if (logs[static_cast<std::size_t>(i)].completed())
            tirs.push_back(logs[static_cast<std::size_t>(i)].tir_pct());
    if (!tirs.empty()) {
        double sum = 0.0;
        for (double v : tirs) sum += v;
        m.tir_pct = sum / static_cast<double>(tirs.size());
        m.tir_episodes_used = static_cast<int>(tirs.size());
    }

    for (int i = m.warmup_episodes; i < m.episodes; ++i) {
        const auto& log = logs[static_cast<std::size_t>(i)];
        if (log.completed() && log.duration_steps == kStepsPerDay) {
            m.first_full_episode = i + 1;
            break;
        }
    }
    return m;
}

struct RunSetup {
    ExperimentConfig config;
    PatientParams patient;
    BbParams bb;
};

inline RunSetup resolve_setup(const ExperimentConfig& config) {
    RunSetup s;
    s.config = config;
    BbParams from_file{};
    bool have_file_bb = false;
    if (!config.profile_file.empty()) {
        const ProfileFile pf = parse_profile_file(KvFile::parse_file(config.profile_file));
        s.patient = pf.patient;
        if (pf.bb.cr > 0.0 && pf.bb.cf > 0.0) {
            from_file = pf.bb;
            have_file_bb = true;
        }
        s.config.profile_id = pf.patient.profile_id;
    } else {
        s.patient = profile_from_id(config.profile_id);
    }

    s.bb = derive_bb_params(s.patient, config.bb_ref_bg, config.bb_aggressiveness);
    if (have_file_bb) s.bb = from_file;
    if (config.bb_cr > 0.0) s.bb.cr = config.bb_cr;
    if (config.bb_cf > 0.0) s.bb.cf = config.bb_cf;
    s.bb.b_tgt = config.bb_target;
    s.bb.bas = s.patient.basal_rate;
    s.bb.validate();
    return s;
}

inline std::unique_ptr<Agent> make_agent(const RunSetup& s) {
    if (s.config.agent == AgentKind::bb) return std::make_unique<BbAgent>(s.bb);
    const PlanningMode mode = s.config.agent == AgentKind::mbrl_with_uncertainty
                                  ? PlanningMode::with_uncertainty
                                  : PlanningMode::without_uncertainty;
    return std::make_unique<MbrlAgent>(s.config.esn, GlucoseScaling::for_basal(s.patient.basal_rate),
                                       s.bb, mode, s.patient.basal_rate, derive_seed(s.config.seed, 3),
                                       s.config.ensemble_members, s.config.warmup_episodes,
                                       s.config.horizon);
}

struct RunResult {
    std::vector<EpisodeLog> logs;
    MetricsReport metrics;
};

using EpisodeCallback = std::function<void(int episode, const EpisodeLog&)>;

// Runs the full schedule for one (profile, agent, seed) cell. Meal draws and
// CGM noise use per-episode substreams of the config seed, so BB and MBRL
// runs with the same seed face identical meal realizations episode-for-
// episode.
inline RunResult train_and_evaluate(const RunSetup& setup, const EpisodeCallback& on_episode = {}) {
    const ExperimentConfig& c = setup.config;
    const int episodes = c.resolved_episodes();
    auto agent = make_agent(setup);

    RunResult out;
    out.logs.reserve(static_cast<std::size_t>(episodes));
    const std::uint64_t meal_stream = derive_seed(c.seed, 1);
    const std::uint64_t cgm_stream = derive_seed(c.seed, 2);
    for (int ep = 1; ep <= episodes; ++ep) {
        Rng meal_rng(derive_seed(meal_stream, static_cast<std::uint64_t>(ep)));
        const auto schedule = sample_daily_carb_schedule(setup.config.meals, meal_rng);
        CgmConfig cgm_cfg;
        cgm_cfg.noise_std = c.cgm_noise_std;
        cgm_cfg.noise_correlation = c.cgm_noise_correlation;
        cgm_cfg.seed = derive_seed(cgm_stream, static_cast<std::uint64_t>(ep));
        CgmSensor sensor(cgm_cfg);
        out.logs.push_back(run_episode(*agent, setup.patient, schedule, sensor));
        if (on_episode) on_episode(ep, out.logs.back());
    }
    out.metrics = compute_metrics(out.logs, setup.config.profile_id, c.agent, c.seed,
                                  c.warmup_episodes);
    return out;
}

inline RunResult train_and_evaluate(const ExperimentConfig& config, const EpisodeCallback& cb = {}) {
    return train_and_evaluate(resolve_setup(config), cb);
}

// Paired ablation: both planning modes over the same derived seed set.
struct CurveRun {
    PlanningMode mode = PlanningMode::with_uncertainty;
    int seed_index = 0;
    std::uint64_t seed = 0;
    MetricsReport metrics;
};

struct CurvesResult {
    std::vector<CurveRun> runs;
    int episodes = 0;
    // Median over seeds of the first full post-warmup episode; seeds that
    // never complete one count as episodes + 1.
    double median_first_full_with = 0.0;
    double median_first_full_without = 0.0;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median_of: empty");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline CurvesResult compare_uncertainty_modes(const ExperimentConfig& base,
                                              const EpisodeCallback& cb = {}) {
    CurvesResult out;
    out.episodes = base.resolved_episodes();
    std::vector<double> first_with, first_without;
    for (int s = 0; s < base.curve_seeds; ++s) {
        for (const PlanningMode mode : {PlanningMode::with_uncertainty, PlanningMode::without_uncertainty}) {
            ExperimentConfig c = base;
            c.agent = mode == PlanningMode::with_uncertainty ? AgentKind::mbrl_with_uncertainty
                                                             : AgentKind::mbrl_without_uncertainty;
            c.seed = derive_seed(base.seed, 100 + static_cast<std::uint64_t>(s));
            CurveRun run;
            run.mode = mode;
            run.seed_index = s;
            run.seed = c.seed;
            run.metrics = train_and_evaluate(c, cb).metrics;
            const double first = run.metrics.first_full_episode
                                     ? static_cast<double>(*run.metrics.first_full_episode)
                                     : static_cast<double>(out.episodes + 1);
            (mode == PlanningMode::with_uncertainty ? first_with : first_without).push_back(first);
            out.runs.push_back(std::move(run));
        }
    }
    out.median_first_full_with = median_of(first_with);
    out.median_first_full_without = median_of(first_without);
    return out;
}

} // namespace glucoloop
