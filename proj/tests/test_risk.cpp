#include "glucoloop/risk.hpp"
#include "glucoloop/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace glucoloop;

TEST_CASE("risk has its global minimum at ~112.5 mg/dl") {
    // Dense scan: the cost near 112.5 must be tiny (natural log calibration),
    // and the scan minimum must land inside 112.5 +/- 0.5.
    REQUIRE(risk(112.5) < 1e-5);
    double best_bg = 0.0, best = 1e300;
    for (double bg = 60.0; bg <= 180.0; bg += 0.01) {
        const double c = risk(bg);
        if (c < best) {
            best = c;
            best_bg = bg;
        }
    }
    REQUIRE(std::abs(best_bg - 112.5) < 0.5);
}

TEST_CASE("natural log reproduces the documented exponent identity") {
    REQUIRE(std::abs(std::pow(std::log(112.5), 1.084) - 5.381) < 0.005);
}

TEST_CASE("hyper and hypo risk increments are nearly symmetric") {
    const double d_hyper = risk(250.0) - risk(180.0);
    const double d_hypo = risk(50.0) - risk(70.0);
    REQUIRE(d_hyper > 9.0);
    REQUIRE(d_hyper < 10.5);
    REQUIRE(d_hypo > 9.0);
    REQUIRE(d_hypo < 10.5);
    REQUIRE(std::abs(d_hyper - d_hypo) / std::max(d_hyper, d_hypo) < 0.02);
}

TEST_CASE("risk rises much faster on the hypo side in raw mg/dl distance") {
    REQUIRE(risk(50.0) > risk(180.0));
}

TEST_CASE("risk is decreasing below and increasing above the minimum") {
    double prev = risk(1.0);
    for (double bg = 2.0; bg <= 112.0; bg += 1.0) {
        const double c = risk(bg);
        REQUIRE(c < prev);
        prev = c;
    }
    prev = risk(113.0);
    for (double bg = 114.0; bg <= 1000.0; bg += 1.0) {
        const double c = risk(bg);
        REQUIRE(c > prev);
        prev = c;
    }
}

TEST_CASE("risk rejects non-positive glucose") {
    REQUIRE_THROWS_AS(risk(0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(risk(-17.0), std::invalid_argument);
}

TEST_CASE("clamp_bg pins values into [1, 1000]") {
    REQUIRE(clamp_bg(-5.0) == 1.0);
    REQUIRE(clamp_bg(0.5) == 1.0);
    REQUIRE(clamp_bg(120.0) == 120.0);
    REQUIRE(clamp_bg(2500.0) == 1000.0);
}

TEST_CASE("mean ensemble cost averages risk over every entry") {
    PredictionMatrix flat{1, 1, {180.0}};
    REQUIRE(mean_ensemble_cost(flat) == Catch::Approx(risk(180.0)).margin(1e-12));

    PredictionMatrix two{2, 1, {70.0, 250.0}};
    REQUIRE(mean_ensemble_cost(two) == Catch::Approx(0.5 * (risk(70.0) + risk(250.0))).margin(1e-12));

    PredictionMatrix happy{3, 4, std::vector<double>(12, 112.5)};
    REQUIRE(mean_ensemble_cost(happy) < 1e-5);
}

TEST_CASE("mean ensemble cost is permutation invariant") {
    Rng rng(11);
    std::vector<double> values;
    for (int i = 0; i < 12; ++i) values.push_back(rng.uniform(40.0, 400.0));
    PredictionMatrix a{3, 4, values};
    std::vector<double> shuffled = values;
    std::reverse(shuffled.begin(), shuffled.end());
    PredictionMatrix b{4, 3, shuffled};  // same multiset, different shape
    REQUIRE(mean_ensemble_cost(a) == Catch::Approx(mean_ensemble_cost(b)).margin(1e-12));
}

TEST_CASE("mean ensemble cost clamps out-of-range predictions") {
    PredictionMatrix wild{1, 2, {2000.0, -50.0}};
    REQUIRE(mean_ensemble_cost(wild) == Catch::Approx(0.5 * (risk(1000.0) + risk(1.0))).margin(1e-12));
}

TEST_CASE("mean ensemble cost rejects an empty matrix") {
    PredictionMatrix empty{0, 0, {}};
    REQUIRE_THROWS_AS(mean_ensemble_cost(empty), std::invalid_argument);
}

TEST_CASE("risk margin vanishes for degenerate ensembles") {
    const std::vector<double> same(5, 133.7);
    REQUIRE(std::abs(risk_margin(same)) < 1e-12);
}

TEST_CASE("risk margin is non-negative near the minimum") {
    const std::vector<double> pair = {100.0, 125.0};
    REQUIRE(risk_margin(pair) >= 0.0);
}

namespace {

// Second differences of risk over [lo, hi]: the convexity certificate the
// Jensen property is scoped to.
bool convex_by_second_differences(double lo, double hi, double h) {
    for (double g = lo; g + 2.0 * h <= hi; g += h) {
        const double dd = risk(g) - 2.0 * risk(g + h) + risk(g + 2.0 * h);
        if (dd < -1e-12) return false;
    }
    return true;
}

} // namespace

TEST_CASE("risk margin obeys Jensen on a verified-convex interval") {
    const double lo = 60.0, hi = 280.0;
    REQUIRE(convex_by_second_differences(lo, hi, 0.25));
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> preds;
        const int m = 2 + static_cast<int>(rng.uniform01() * 6.0);
        for (int i = 0; i < m; ++i) preds.push_back(rng.uniform(lo, hi));
        REQUIRE(risk_margin(preds) >= -1e-12);
    }
}

TEST_CASE("risk margin rejects empty input") {
    REQUIRE_THROWS_AS(risk_margin(std::vector<double>{}), std::invalid_argument);
}
