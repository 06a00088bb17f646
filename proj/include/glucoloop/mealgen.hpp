#pragma once

// Stochastic daily meal schedule. Six candidate events; each day every event
// fires independently with its own probability, its time is drawn from a
// normal truncated to [lower, upper] hours (rejection sampling) and its size
// from an untruncated normal clamped below at 1 g.

#include "glucoloop/patient.hpp"
#include "glucoloop/rng.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace glucoloop {

// Episodes start at 06:00; hour h of the day maps to step round((h-6)*12).
inline constexpr double kEpisodeStartHour = 6.0;

struct MealSpec {
    std::string name;
    double probability;   // chance the event occurs on a given day
    double lower_hour;    // truncation bounds for the timing draw
    double upper_hour;
    double mean_hour;
    double std_hour;
    double mean_carbs_g;
    double std_carbs_g;

    bool operator==(const MealSpec&) const = default;

    void validate() const {
        if (!(probability >= 0.0 && probability <= 1.0))
            throw std::invalid_argument("MealSpec " + name + ": probability outside [0, 1]");
        if (!(lower_hour < upper_hour))
            throw std::invalid_argument("MealSpec " + name + ": empty time window");
        if (!(std_hour >= 0.0) || !(std_carbs_g >= 0.0))
            throw std::invalid_argument("MealSpec " + name + ": negative spread");
        if (!(mean_carbs_g > 0.0))
            throw std::invalid_argument("MealSpec " + name + ": mean carbs must be positive");
    }
};

inline std::array<MealSpec, 6> default_meal_specs() {
    return {{
        {"breakfast", 0.95, 5.0, 9.0, 7.0, 1.0, 45.0, 10.0},
        {"snack1", 0.30, 9.0, 10.0, 9.5, 0.5, 10.0, 5.0},
        {"lunch", 0.95, 10.0, 14.0, 12.0, 1.0, 70.0, 10.0},
        {"snack2", 0.30, 14.0, 16.0, 15.0, 0.5, 10.0, 5.0},
        {"dinner", 0.95, 16.0, 20.0, 18.0, 1.0, 80.0, 10.0},
        {"snack3", 0.30, 20.0, 23.0, 21.5, 0.5, 10.0, 5.0},
    }};
}

struct MealEvent {
    int step = 0;         // 5-min step within the episode, [0, 287]
    double hour = 0.0;    // clock hour the event was drawn at
    double carbs_g = 0.0;
    int spec_index = -1;  // producing MealSpec; -1 once events have been merged
};

inline int hour_to_step(double hour) {
    const int step = static_cast<int>(std::lround((hour - kEpisodeStartHour) * 12.0));
    return std::clamp(step, 0, kStepsPerDay - 1);
}

// Normal draw constrained to [lo, hi] by rejection; a zero spread collapses
// to the clamped mean.
inline double sample_truncnorm(double mean, double stddev, double lo, double hi, Rng& rng) {
    if (!(lo < hi)) throw std::invalid_argument("sample_truncnorm: empty interval");
    if (!(stddev >= 0.0)) throw std::invalid_argument("sample_truncnorm: negative stddev");
    if (stddev == 0.0) return std::clamp(mean, lo, hi);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const double v = rng.normal(mean, stddev);
        if (v >= lo && v <= hi) return v;
    }
    throw std::runtime_error("sample_truncnorm: rejection sampling failed to land in bounds");
}

// Per-spec draws for one day, unmerged, sorted by step. Each spec fires
// independently with its probability; an event whose drawn hour precedes the
// 06:00 start lands on step 0.
template <std::size_t N>
inline std::vector<MealEvent> sample_event_draws(const std::array<MealSpec, N>& specs, Rng& rng) {
    std::vector<MealEvent> events;
    events.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
        const MealSpec& spec = specs[i];
        spec.validate();
        if (rng.uniform01() >= spec.probability) continue;
        MealEvent e;
        e.spec_index = static_cast<int>(i);
        e.hour = sample_truncnorm(spec.mean_hour, spec.std_hour, spec.lower_hour, spec.upper_hour, rng);
        e.carbs_g = std::max(1.0, rng.normal(spec.mean_carbs_g, spec.std_carbs_g));
        e.step = hour_to_step(e.hour);
        events.push_back(e);
    }
    std::sort(events.begin(), events.end(),
              [](const MealEvent& a, const MealEvent& b) { return a.step < b.step; });
    return events;
}

// One day of meals as the environment consumes them: sorted, step-unique,
// same-step draws merged by summing carbs (the merged event keeps the first
// constituent's hour and drops the MealSpec index).
template <std::size_t N>
inline std::vector<MealEvent> sample_day(const std::array<MealSpec, N>& specs, Rng& rng) {
    std::vector<MealEvent> merged;
    for (const MealEvent& e : sample_event_draws(specs, rng)) {
        if (!merged.empty() && merged.back().step == e.step) {
            merged.back().carbs_g += e.carbs_g;
            merged.back().spec_index = -1;
        } else {
            merged.push_back(e);
        }
    }
    return merged;
}

// Per-step carb totals for one episode day.
template <std::size_t N>
inline std::vector<double> sample_daily_carb_schedule(const std::array<MealSpec, N>& specs, Rng& rng) {
    std::vector<double> carbs(kStepsPerDay, 0.0);
    for (const MealEvent& e : sample_day(specs, rng)) carbs[static_cast<std::size_t>(e.step)] += e.carbs_g;
    return carbs;
}

} // namespace glucoloop
