#pragma once

// Compartmental glucose-insulin virtual patient. Minimal-model style core
// (glucose + remote insulin action) extended with a two-compartment gut
// absorption chain and first-order plasma insulin kinetics:
//
//   dG/dt  = EGP - p1*G - X*G + k_carb * k_abs * Q2      [mg/dl/min]
//   dX/dt  = p2 * (SI*(I - Ib) - X)                       [1/min^2]
//   dI/dt  = -ke*I + u(t)                                 [U/min]
//   dQ1/dt = -k_abs*Q1                                    [g/min]
//   dQ2/dt = k_abs*(Q1 - Q2)                              [g/min]
//
// with u(t) the insulin delivery rate over the step and carbs entering Q1 as
// an impulse at step start. Choosing EGP = p1 * equilibrium_bg makes
// (G, X, I, Q1, Q2) = (equilibrium_bg, 0, Ib, 0, 0) an exact fixed point
// under constant basal delivery, so basal-only trajectories hold steady.
//
// Integration: classical 4th-order Runge-Kutta with 1-minute substeps inside
// each 5-minute environment step. Glucose is clamped to [1, 1000] mg/dl and
// masses to >= 0 after every substep.

#include "glucoloop/rng.hpp"
#include "glucoloop/risk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace glucoloop {

inline constexpr double kStepMinutes = 5.0;
inline constexpr int kStepsPerDay = 288;

// Carbohydrate bioavailability and glucose distribution volume of the
// stand-in model; together they convert absorbed grams to mg/dl.
inline constexpr double kCarbBioavailability = 0.9;
inline constexpr double kGlucoseVolumeDlPerKg = 1.8;

enum class AgeGroup { child, adolescent, adult };

inline const char* to_string(AgeGroup g) {
    switch (g) {
        case AgeGroup::child: return "child";
        case AgeGroup::adolescent: return "adolescent";
        case AgeGroup::adult: return "adult";
    }
    return "?";
}

struct PatientParams {
    double body_mass = 70.0;               // kg
    double basal_rate = 0.1;               // insulin-units per 5-min step
    double insulin_sensitivity = 0.035;    // remote-action gain, 1/min per unit above basal
    double carb_absorption_rate = 0.035;   // 1/min
    double insulin_action_rate = 0.025;    // 1/min
    double insulin_clearance_rate = 0.12;  // 1/min
    double glucose_self_regulation = 0.004;// 1/min
    double endogenous_production = 0.48;   // mg/dl/min, = self_regulation * equilibrium_bg
    double equilibrium_bg = 120.0;         // mg/dl
    std::string profile_id = "adult#001";

    double basal_rate_per_min() const { return basal_rate / kStepMinutes; }
    // Plasma insulin level sustained by basal delivery alone.
    double basal_plasma_insulin() const { return basal_rate_per_min() / insulin_clearance_rate; }
    // mg/dl glucose appearance per gram absorbed.
    double carb_gain() const {
        return kCarbBioavailability * 1000.0 / (kGlucoseVolumeDlPerKg * body_mass);
    }

    void validate() const {
        auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!positive(body_mass) || !positive(basal_rate) || !positive(insulin_sensitivity) ||
            !positive(carb_absorption_rate) || !positive(insulin_action_rate) ||
            !positive(insulin_clearance_rate) || !positive(glucose_self_regulation))
            throw std::invalid_argument("PatientParams: rate constants and basal must be positive");
        if (!(equilibrium_bg >= 90.0 && equilibrium_bg <= 140.0))
            throw std::invalid_argument("PatientParams: equilibrium_bg outside [90, 140]");
        // Fixed-point construction EGP = p1 * Gb.
        if (std::abs(endogenous_production - glucose_self_regulation * equilibrium_bg) >
            1e-9 * std::max(1.0, endogenous_production))
            throw std::invalid_argument(
                "PatientParams: endogenous_production must equal glucose_self_regulation * equilibrium_bg");
    }
};

struct PatientState {
    double plasma_glucose = 120.0;       // mg/dl
    double remote_insulin_effect = 0.0;  // 1/min, relative to basal action
    double plasma_insulin = 0.0;         // insulin-units (normalized)
    double gut_carbs_1 = 0.0;            // grams
    double gut_carbs_2 = 0.0;            // grams

    bool finite() const {
        return std::isfinite(plasma_glucose) && std::isfinite(remote_insulin_effect) &&
               std::isfinite(plasma_insulin) && std::isfinite(gut_carbs_1) && std::isfinite(gut_carbs_2);
    }
};

inline PatientState steady_state(const PatientParams& p) {
    p.validate();
    PatientState s;
    s.plasma_glucose = p.equilibrium_bg;
    s.remote_insulin_effect = 0.0;
    s.plasma_insulin = p.basal_plasma_insulin();
    s.gut_carbs_1 = 0.0;
    s.gut_carbs_2 = 0.0;
    return s;
}

namespace detail {

struct Deriv {
    double g, x, i, q1, q2;
};

inline Deriv patient_deriv(const PatientState& s, const PatientParams& p, double insulin_rate) {
    const double ra = p.carb_gain() * p.carb_absorption_rate * s.gut_carbs_2;
    Deriv d;
    d.g = p.endogenous_production - p.glucose_self_regulation * s.plasma_glucose -
          s.remote_insulin_effect * s.plasma_glucose + ra;
    d.x = p.insulin_action_rate *
          (p.insulin_sensitivity * (s.plasma_insulin - p.basal_plasma_insulin()) - s.remote_insulin_effect);
    d.i = -p.insulin_clearance_rate * s.plasma_insulin + insulin_rate;
    d.q1 = -p.carb_absorption_rate * s.gut_carbs_1;
    d.q2 = p.carb_absorption_rate * (s.gut_carbs_1 - s.gut_carbs_2);
    return d;
}

inline PatientState advanced(const PatientState& s, const Deriv& d, double h) {
    PatientState r = s;
    r.plasma_glucose += h * d.g;
    r.remote_insulin_effect += h * d.x;
    r.plasma_insulin += h * d.i;
    r.gut_carbs_1 += h * d.q1;
    r.gut_carbs_2 += h * d.q2;
    return r;
}

} // namespace detail

struct StepResult {
    PatientState state;
    double true_bg = 0.0;  // mg/dl after the step
};

// Advances the patient by dt minutes. `insulin_units` is the total delivery
// over the step (basal + bolus), spread uniformly; `carbs_g` enters the gut
// at step start.
inline StepResult step_patient(const PatientState& state, const PatientParams& params,
                               double insulin_units, double carbs_g, double dt_min = kStepMinutes) {
    if (!state.finite())
        throw std::invalid_argument("step_patient: non-finite patient state");
    if (!(insulin_units >= 0.0) || !std::isfinite(insulin_units))
        throw std::invalid_argument("step_patient: insulin must be >= 0");
    if (!(carbs_g >= 0.0) || !std::isfinite(carbs_g))
        throw std::invalid_argument("step_patient: carbs must be >= 0");
    if (!(dt_min > 0.0))
        throw std::invalid_argument("step_patient: dt must be positive");

    PatientState s = state;
    s.gut_carbs_1 += carbs_g;

    const int substeps = std::max(1, static_cast<int>(std::lround(dt_min)));
    const double h = dt_min / substeps;
    const double rate = insulin_units / dt_min;  // U/min

    for (int k = 0; k < substeps; ++k) {
        const auto k1 = detail::patient_deriv(s, params, rate);
        const auto k2 = detail::patient_deriv(detail::advanced(s, k1, 0.5 * h), params, rate);
        const auto k3 = detail::patient_deriv(detail::advanced(s, k2, 0.5 * h), params, rate);
        const auto k4 = detail::patient_deriv(detail::advanced(s, k3, h), params, rate);
        s.plasma_glucose += h / 6.0 * (k1.g + 2.0 * k2.g + 2.0 * k3.g + k4.g);
        s.remote_insulin_effect += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
        s.plasma_insulin += h / 6.0 * (k1.i + 2.0 * k2.i + 2.0 * k3.i + k4.i);
        s.gut_carbs_1 += h / 6.0 * (k1.q1 + 2.0 * k2.q1 + 2.0 * k3.q1 + k4.q1);
        s.gut_carbs_2 += h / 6.0 * (k1.q2 + 2.0 * k2.q2 + 2.0 * k3.q2 + k4.q2);

        s.plasma_glucose = clamp_bg(s.plasma_glucose);
        s.plasma_insulin = std::max(0.0, s.plasma_insulin);
        s.gut_carbs_1 = std::max(0.0, s.gut_carbs_1);
        s.gut_carbs_2 = std::max(0.0, s.gut_carbs_2);
    }

    if (!s.finite())
        throw std::runtime_error("step_patient: integration produced a non-finite state");
    return StepResult{s, s.plasma_glucose};
}

// Nine virtual people: three age-group templates, each instantiated three
// times with deterministic +/-15% perturbations of the physiology constants.
// The equilibrium glucose stays 120 mg/dl for every profile.
inline PatientParams make_profile(AgeGroup group, int index) {
    if (index < 1 || index > 3)
        throw std::invalid_argument("make_profile: index must be in 1..3");

    PatientParams p;
    switch (group) {
        case AgeGroup::child:
            p.body_mass = 35.0;
            p.basal_rate = 0.05;
            p.insulin_sensitivity = 0.070;
            p.carb_absorption_rate = 0.045;
            p.insulin_action_rate = 0.030;
            p.insulin_clearance_rate = 0.130;
            p.glucose_self_regulation = 0.0050;
            break;
        case AgeGroup::adolescent:
            p.body_mass = 55.0;
            p.basal_rate = 0.08;
            p.insulin_sensitivity = 0.050;
            p.carb_absorption_rate = 0.040;
            p.insulin_action_rate = 0.028;
            p.insulin_clearance_rate = 0.125;
            p.glucose_self_regulation = 0.0045;
            break;
        case AgeGroup::adult:
            p.body_mass = 70.0;
            p.basal_rate = 0.10;
            p.insulin_sensitivity = 0.035;
            p.carb_absorption_rate = 0.035;
            p.insulin_action_rate = 0.025;
            p.insulin_clearance_rate = 0.120;
            p.glucose_self_regulation = 0.0040;
            break;
    }

    constexpr std::uint64_t kProfileSeed = 0x67756c636f;
    Rng rng(derive_seed(kProfileSeed, static_cast<std::uint64_t>(group) * 8 + index));
    auto perturb = [&](double v) { return v * (1.0 + rng.uniform(-0.15, 0.15)); };
    p.body_mass = perturb(p.body_mass);
    p.basal_rate = perturb(p.basal_rate);
    p.insulin_sensitivity = perturb(p.insulin_sensitivity);
    p.carb_absorption_rate = perturb(p.carb_absorption_rate);
    p.insulin_action_rate = perturb(p.insulin_action_rate);
    p.insulin_clearance_rate = perturb(p.insulin_clearance_rate);
    p.glucose_self_regulation = perturb(p.glucose_self_regulation);

    p.equilibrium_bg = 120.0;
    p.endogenous_production = p.glucose_self_regulation * p.equilibrium_bg;

    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s#%03d", to_string(group), index);
    p.profile_id = buf;

    p.validate();
    return p;
}

// CGM sensing: true BG plus first-order autocorrelated Gaussian noise with
// stationary standard deviation noise_std.
struct CgmConfig {
    double noise_std = 0.0;          // mg/dl
    double noise_correlation = 0.0;  // [0, 1)
    std::uint64_t seed = 0;

    void validate() const {
        if (!(noise_std >= 0.0)) throw std::invalid_argument("CgmConfig: noise_std must be >= 0");
        if (!(noise_correlation >= 0.0 && noise_correlation < 1.0))
            throw std::invalid_argument("CgmConfig: noise_correlation must be in [0, 1)");
    }
};

class CgmSensor {
public:
    explicit CgmSensor(const CgmConfig& cfg) : cfg_(cfg), rng_(cfg.seed) { cfg_.validate(); }

    double read(double true_bg) {
        if (!(true_bg > 0.0)) throw std::invalid_argument("CgmSensor: true BG must be positive");
        if (cfg_.noise_std == 0.0) return true_bg;
        const double phi = cfg_.noise_correlation;
        noise_ = phi * noise_ + std::sqrt(1.0 - phi * phi) * cfg_.noise_std * rng_.normal();
        return std::max(kBgFloor, true_bg + noise_);
    }

private:
    CgmConfig cfg_;
    Rng rng_;
    double noise_ = 0.0;
};

} // namespace glucoloop
