#pragma once

// Receding-horizon controller over a fixed action table: six candidate
// sequences, each a single first-step bolus (multiplier x basal) followed by
// zero bolus, rolled out through the ensemble over 48 steps with assumed
// future carbs of zero. The cheapest sequence wins and only its first action
// is executed; the caller re-plans every 5-minute step.

#include "glucoloop/risk.hpp"

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace glucoloop {

inline constexpr std::array<double, 6> kBolusMultipliers = {0.0, 5.0, 10.0, 20.0, 40.0, 80.0};
inline constexpr int kDefaultHorizon = 48;  // 4 hours of 5-minute steps

enum class PlanningMode { with_uncertainty, without_uncertainty };

inline const char* to_string(PlanningMode m) {
    return m == PlanningMode::with_uncertainty ? "with_uncertainty" : "without_uncertainty";
}

struct ActionTable {
    std::array<double, 6> multipliers = kBolusMultipliers;
    int horizon = kDefaultHorizon;
    double basal_rate = 0.1;  // units per step

    double first_bolus(int sequence) const { return multipliers.at(static_cast<std::size_t>(sequence)) * basal_rate; }

    // Bolus per step for one candidate sequence: first step only.
    std::vector<double> bolus_sequence(int sequence) const {
        std::vector<double> b(static_cast<std::size_t>(horizon), 0.0);
        if (horizon > 0) b[0] = first_bolus(sequence);
        return b;
    }
};

inline ActionTable build_action_table(double basal_rate, int horizon = kDefaultHorizon) {
    if (!(basal_rate > 0.0)) throw std::invalid_argument("build_action_table: basal_rate must be positive");
    if (horizon <= 0) throw std::invalid_argument("build_action_table: horizon must be positive");
    ActionTable t;
    t.basal_rate = basal_rate;
    t.horizon = horizon;
    return t;
}

struct Plan {
    double chosen_multiplier = 0.0;
    double chosen_bolus = 0.0;
    int chosen_sequence = 0;
    std::array<double, 6> per_sequence_costs{};
    PredictionMatrix prediction_matrix;        // chosen sequence, M x horizon
    std::vector<double> risk_margin_profile;   // per-step ensemble disagreement
};

// with_uncertainty: mean risk over every member and step; without: risk of
// the member-mean trajectory, averaged over steps. The difference is the
// risk margin averaged over the horizon.
inline double sequence_cost(const PredictionMatrix& pm, PlanningMode mode) {
    if (mode == PlanningMode::with_uncertainty) return mean_ensemble_cost(pm);
    if (pm.models <= 0 || pm.horizon <= 0) throw std::invalid_argument("sequence_cost: empty prediction matrix");
    double total = 0.0;
    for (int t = 0; t < pm.horizon; ++t) {
        double mean = 0.0;
        for (int m = 0; m < pm.models; ++m) mean += clamp_bg(pm.at(m, t));
        total += risk(mean / pm.models);
    }
    return total / pm.horizon;
}

// Argmin with ties (within 1e-12) resolved toward the earliest entry, which
// the action table orders by ascending multiplier: when indifferent, give
// less insulin.
inline int select_action(std::span<const double> costs) {
    if (costs.empty()) throw std::invalid_argument("select_action: no costs");
    int best = 0;
    for (int s = 1; s < static_cast<int>(costs.size()); ++s)
        if (costs[s] < costs[best] - 1e-12) best = s;
    return best;
}

template <class Ensemble>
inline Plan plan(const Ensemble& ensemble, const ActionTable& table, PlanningMode mode) {
    if (!ensemble.fitted()) throw std::logic_error("plan: ensemble readouts are not fitted");

    const std::vector<double> assumed_carbs(static_cast<std::size_t>(table.horizon), 0.0);
    std::array<double, 6> costs{};
    std::array<PredictionMatrix, 6> predictions;
    for (int s = 0; s < 6; ++s) {
        const auto bolus = table.bolus_sequence(s);
        predictions[static_cast<std::size_t>(s)] = ensemble.rollout(bolus, assumed_carbs);
        costs[static_cast<std::size_t>(s)] = sequence_cost(predictions[static_cast<std::size_t>(s)], mode);
    }

    Plan p;
    p.chosen_sequence = select_action(costs);
    p.chosen_multiplier = table.multipliers[static_cast<std::size_t>(p.chosen_sequence)];
    p.chosen_bolus = table.first_bolus(p.chosen_sequence);
    p.per_sequence_costs = costs;
    p.prediction_matrix = std::move(predictions[static_cast<std::size_t>(p.chosen_sequence)]);
    p.risk_margin_profile.reserve(static_cast<std::size_t>(p.prediction_matrix.horizon));
    for (int t = 0; t < p.prediction_matrix.horizon; ++t) {
        const auto column = p.prediction_matrix.column(t);
        p.risk_margin_profile.push_back(risk_margin(column));
    }
    return p;
}

inline double act(const Plan& p) { return p.chosen_bolus; }

} // namespace glucoloop
