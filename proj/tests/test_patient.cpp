#include "glucoloop/patient.hpp"
#include "glucoloop/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace glucoloop;

namespace {

// Basal-only advance by `steps`, with optional carbs at step 0 and optional
// extra insulin per step.
PatientState advance(const PatientParams& p, PatientState s, int steps, double carbs_at_start = 0.0,
                     const std::vector<double>& extra_insulin = {}) {
    for (int t = 0; t < steps; ++t) {
        const double extra = t < static_cast<int>(extra_insulin.size()) ? extra_insulin[static_cast<std::size_t>(t)] : 0.0;
        s = step_patient(s, p, p.basal_rate + extra, t == 0 ? carbs_at_start : 0.0).state;
    }
    return s;
}

} // namespace

TEST_CASE("profiles: equilibrium, ordering, determinism") {
    const PatientParams adult = make_profile(AgeGroup::adult, 1);
    REQUIRE(adult.equilibrium_bg == 120.0);
    REQUIRE(adult.profile_id == "adult#001");

    const PatientParams child = make_profile(AgeGroup::child, 1);
    REQUIRE(child.body_mass < adult.body_mass);
    REQUIRE(child.insulin_sensitivity > adult.insulin_sensitivity);

    const PatientParams again = make_profile(AgeGroup::adult, 2);
    const PatientParams again2 = make_profile(AgeGroup::adult, 2);
    REQUIRE(again.body_mass == again2.body_mass);
    REQUIRE(again.insulin_sensitivity == again2.insulin_sensitivity);

    REQUIRE_THROWS_AS(make_profile(AgeGroup::adult, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(make_profile(AgeGroup::adult, 4), std::invalid_argument);
}

TEST_CASE("all nine profiles are valid and distinct") {
    std::vector<PatientParams> all;
    for (const AgeGroup g : {AgeGroup::child, AgeGroup::adolescent, AgeGroup::adult})
        for (int i = 1; i <= 3; ++i) all.push_back(make_profile(g, i));
    REQUIRE(all.size() == 9);
    for (std::size_t a = 0; a < all.size(); ++a)
        for (std::size_t b = a + 1; b < all.size(); ++b) {
            REQUIRE(all[a].profile_id != all[b].profile_id);
            REQUIRE(all[a].insulin_sensitivity != all[b].insulin_sensitivity);
        }
}

TEST_CASE("parameter validation rejects broken profiles") {
    PatientParams p = make_profile(AgeGroup::adult, 1);
    p.endogenous_production *= 1.5;  // breaks the fixed-point construction
    REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);

    PatientParams q = make_profile(AgeGroup::adult, 1);
    q.insulin_clearance_rate = 0.0;
    REQUIRE_THROWS_AS(q.validate(), std::invalid_argument);

    PatientParams r = make_profile(AgeGroup::adult, 1);
    r.equilibrium_bg = 200.0;
    r.endogenous_production = r.glucose_self_regulation * r.equilibrium_bg;
    REQUIRE_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("steady state sits at the equilibrium with empty gut") {
    const PatientParams p = make_profile(AgeGroup::adult, 1);
    const PatientState s = steady_state(p);
    REQUIRE(s.plasma_glucose == p.equilibrium_bg);
    REQUIRE(s.gut_carbs_1 == 0.0);
    REQUIRE(s.gut_carbs_2 == 0.0);
    REQUIRE(s.remote_insulin_effect == 0.0);
}

TEST_CASE("basal-only trajectory holds the fixed point for 24 h") {
    for (const AgeGroup g : {AgeGroup::child, AgeGroup::adolescent, AgeGroup::adult}) {
        for (int i = 1; i <= 3; ++i) {
            const PatientParams p = make_profile(g, i);
            const PatientState end = advance(p, steady_state(p), kStepsPerDay);
            REQUIRE(std::abs(end.plasma_glucose - p.equilibrium_bg) < 0.1);
        }
    }
}

TEST_CASE("one basal step moves BG less than 1e-3 from equilibrium") {
    const PatientParams p = make_profile(AgeGroup::adult, 1);
    const StepResult r = step_patient(steady_state(p), p, p.basal_rate, 0.0);
    REQUIRE(std::abs(r.true_bg - p.equilibrium_bg) < 1e-3);
}

TEST_CASE("a 60 g meal raises BG above equilibrium within 2 h") {
    const PatientParams p = make_profile(AgeGroup::adult, 1);
    PatientState s = steady_state(p);
    double peak = 0.0;
    for (int t = 0; t < 24; ++t) {
        s = step_patient(s, p, p.basal_rate, t == 0 ? 60.0 : 0.0).state;
        peak = std::max(peak, s.plasma_glucose);
    }
    REQUIRE(peak > p.equilibrium_bg + 10.0);
    // Golden value, recorded from the first run of this model and frozen.
    REQUIRE(peak == Catch::Approx(459.038173).margin(0.01));
}

TEST_CASE("doubled basal for 2 h pulls BG below equilibrium") {
    const PatientParams p = make_profile(AgeGroup::adult, 1);
    PatientState s = steady_state(p);
    for (int t = 0; t < 24; ++t) s = step_patient(s, p, 2.0 * p.basal_rate, 0.0).state;
    REQUIRE(s.plasma_glucose < p.equilibrium_bg);
}

TEST_CASE("more insulin never yields higher BG (20 random pairs)") {
    const PatientParams p = make_profile(AgeGroup::adult, 1);
    Rng rng(1234);
    for (int pair = 0; pair < 20; ++pair) {
        const int steps = 24 + static_cast<int>(rng.uniform01() * 48.0);
        const double carbs = rng.uniform(20.0, 90.0);
        std::vector<double> lo(static_cast<std::size_t>(steps)), hi(static_cast<std::size_t>(steps));
        for (int t = 0; t < steps; ++t) {
            lo[static_cast<std::size_t>(t)] = rng.uniform(0.0, 0.3);
            hi[static_cast<std::size_t>(t)] = lo[static_cast<std::size_t>(t)] + rng.uniform(0.0, 0.3);
        }
        hi[0] += 0.1;  // strictly more somewhere
        const PatientState a = advance(p, steady_state(p), steps, carbs, lo);
        const PatientState b = advance(p, steady_state(p), steps, carbs, hi);
        REQUIRE(b.plasma_glucose <= a.plasma_glucose + 1e-9);
    }
}

TEST_CASE("a bigger meal peaks higher (20 random pairs)") {
    const PatientParams p = make_profile(AgeGroup::adult, 1);
    Rng rng(4321);
    for (int pair = 0; pair < 20; ++pair) {
        const double c1 = rng.uniform(10.0, 80.0);
        const double c2 = c1 + rng.uniform(5.0, 40.0);
        auto peak_of = [&](double carbs) {
            PatientState s = steady_state(p);
            double peak = 0.0;
            for (int t = 0; t < 48; ++t) {
                s = step_patient(s, p, p.basal_rate, t == 0 ? carbs : 0.0).state;
                peak = std::max(peak, s.plasma_glucose);
            }
            return peak;
        };
        REQUIRE(peak_of(c2) > peak_of(c1));
    }
}

TEST_CASE("masses stay non-negative under arbitrary inputs") {
    const PatientParams p = make_profile(AgeGroup::child, 2);
    Rng rng(99);
    PatientState s = steady_state(p);
    for (int t = 0; t < 288; ++t) {
        const double insulin = rng.uniform01() < 0.3 ? 0.0 : rng.uniform(0.0, 5.0);
        const double carbs = rng.uniform01() < 0.9 ? 0.0 : rng.uniform(0.0, 100.0);
        s = step_patient(s, p, insulin, carbs).state;
        REQUIRE(s.gut_carbs_1 >= 0.0);
        REQUIRE(s.gut_carbs_2 >= 0.0);
        REQUIRE(s.plasma_insulin >= 0.0);
        REQUIRE(s.plasma_glucose >= kBgFloor);
        REQUIRE(s.plasma_glucose <= kBgCeil);
    }
}

TEST_CASE("identical inputs give a bit-identical trajectory") {
    const PatientParams p = make_profile(AgeGroup::adolescent, 3);
    PatientState a = steady_state(p), b = steady_state(p);
    for (int t = 0; t < 100; ++t) {
        const double carbs = t == 10 ? 45.0 : 0.0;
        a = step_patient(a, p, p.basal_rate + 0.2, carbs).state;
        b = step_patient(b, p, p.basal_rate + 0.2, carbs).state;
    }
    REQUIRE(a.plasma_glucose == b.plasma_glucose);
    REQUIRE(a.plasma_insulin == b.plasma_insulin);
    REQUIRE(a.remote_insulin_effect == b.remote_insulin_effect);
}

TEST_CASE("step_patient rejects bad inputs") {
    const PatientParams p = make_profile(AgeGroup::adult, 1);
    REQUIRE_THROWS_AS(step_patient(steady_state(p), p, -0.1, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(step_patient(steady_state(p), p, 0.1, -5.0), std::invalid_argument);
    PatientState broken = steady_state(p);
    broken.plasma_glucose = std::nan("");
    REQUIRE_THROWS_AS(step_patient(broken, p, 0.1, 0.0), std::invalid_argument);
}

TEST_CASE("cgm with zero noise returns the true value") {
    CgmConfig cfg;
    CgmSensor sensor(cfg);
    REQUIRE(sensor.read(150.0) == 150.0);
    REQUIRE(sensor.read(88.25) == 88.25);
}

TEST_CASE("cgm noise has the configured spread") {
    CgmConfig cfg;
    cfg.noise_std = 5.0;
    cfg.seed = 7;
    CgmSensor sensor(cfg);
    const int n = 10000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = sensor.read(150.0) - 150.0;
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    REQUIRE(std::abs(sd - 5.0) / 5.0 < 0.10);
}

TEST_CASE("cgm noise sequence is seed-deterministic") {
    CgmConfig cfg;
    cfg.noise_std = 3.0;
    cfg.noise_correlation = 0.5;
    cfg.seed = 42;
    CgmSensor a(cfg), b(cfg);
    for (int i = 0; i < 500; ++i) REQUIRE(a.read(120.0) == b.read(120.0));
}

TEST_CASE("cgm noise autocorrelation tracks the config") {
    CgmConfig cfg;
    cfg.noise_std = 4.0;
    cfg.noise_correlation = 0.9;
    cfg.seed = 5;
    CgmSensor sensor(cfg);
    std::vector<double> noise;
    for (int i = 0; i < 20000; ++i) noise.push_back(sensor.read(200.0) - 200.0);
    noise.erase(noise.begin(), noise.begin() + 200);  // burn-in to stationarity
    double mean = 0.0;
    for (double v : noise) mean += v;
    mean /= static_cast<double>(noise.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i < noise.size(); ++i) {
        num += (noise[i] - mean) * (noise[i - 1] - mean);
        den += (noise[i] - mean) * (noise[i] - mean);
    }
    REQUIRE(std::abs(num / den - 0.9) < 0.03);
}

TEST_CASE("cgm config validation") {
    CgmConfig bad;
    bad.noise_correlation = 1.0;
    REQUIRE_THROWS_AS(CgmSensor(bad), std::invalid_argument);
    CgmConfig neg;
    neg.noise_std = -1.0;
    REQUIRE_THROWS_AS(CgmSensor(neg), std::invalid_argument);
}
