#pragma once

// Blood glucose risk cost (a clinical risk index, symmetric in log space) and
// the ensemble cost statistics consumed by the planner.
//
//   risk(BGL) = 15.09 * (ln(BGL)^1.084 - 5.381)^2
//
// Natural logarithm: it places the unique minimum at ~112.5 mg/dl and makes
// the hyper/hypo transitions 180->250 and 70->50 nearly equal in cost, which
// base-10 does not.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace glucoloop {

// Predictions are clamped to this range before costing so the log stays finite.
inline constexpr double kBgFloor = 1.0;    // mg/dl
inline constexpr double kBgCeil = 1000.0;  // mg/dl

inline double clamp_bg(double bgl) {
    if (bgl < kBgFloor) return kBgFloor;
    if (bgl > kBgCeil) return kBgCeil;
    return bgl;
}

inline double risk(double bgl) {
    if (!(bgl > 0.0)) throw std::invalid_argument("risk: BGL must be positive");
    const double d = std::pow(std::log(bgl), 1.084) - 5.381;
    return 15.09 * d * d;
}

// M model predictions over a T-step horizon, row-major (model index major).
struct PredictionMatrix {
    int models = 0;   // M
    int horizon = 0;  // T
    std::vector<double> values;

    PredictionMatrix() = default;
    PredictionMatrix(int m, int t) : models(m), horizon(t), values(static_cast<std::size_t>(m) * t, 0.0) {}
    PredictionMatrix(int m, int t, std::vector<double> v) : models(m), horizon(t), values(std::move(v)) {
        if (values.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(t))
            throw std::invalid_argument("PredictionMatrix: value count does not match M x T");
    }

    double& at(int m, int t) { return values[static_cast<std::size_t>(m) * horizon + t]; }
    double at(int m, int t) const { return values[static_cast<std::size_t>(m) * horizon + t]; }

    // One horizon step across all models.
    std::vector<double> column(int t) const {
        std::vector<double> col(models);
        for (int m = 0; m < models; ++m) col[m] = at(m, t);
        return col;
    }
};

// (1/MT) sum_t sum_m risk(BGL_t^m), entries clamped to [1, 1000].
inline double mean_ensemble_cost(const PredictionMatrix& preds) {
    if (preds.models < 1 || preds.horizon < 1 || preds.values.empty())
        throw std::invalid_argument("mean_ensemble_cost: empty prediction matrix");
    double sum = 0.0;
    for (double v : preds.values) sum += risk(clamp_bg(v));
    return sum / static_cast<double>(preds.values.size());
}

// Risk margin RM = E[risk(BGL)] - risk(E[BGL]) across the ensemble at one step.
// Zero for a degenerate (all-equal) ensemble; non-negative wherever the risk
// curve is convex (Jensen).
inline double risk_margin(std::span<const double> preds_at_t) {
    if (preds_at_t.empty()) throw std::invalid_argument("risk_margin: no predictions");
    double mean_cost = 0.0;
    double mean_pred = 0.0;
    for (double v : preds_at_t) {
        const double c = clamp_bg(v);
        mean_cost += risk(c);
        mean_pred += c;
    }
    const double n = static_cast<double>(preds_at_t.size());
    return mean_cost / n - risk(mean_pred / n);
}

} // namespace glucoloop
