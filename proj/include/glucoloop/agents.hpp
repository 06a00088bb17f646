#pragma once

// Controller interface and the two shipped controllers. Each 5-minute step
// the agent sees the latest CGM reading, the carbs being eaten right now
// (nothing is announced in advance), and the insulin the pump delivered at
// the previous step, and returns the bolus to add on top of basal. A return
// of -basal nulls the pump entirely; the environment rejects anything that
// would make total delivery negative.

#include "glucoloop/baselines.hpp"
#include "glucoloop/esn.hpp"
#include "glucoloop/planner.hpp"

#include <memory>
#include <optional>
#include <stdexcept>

namespace glucoloop {

class Agent {
public:
    virtual ~Agent() = default;
    virtual void begin_episode(double initial_cgm) = 0;
    // Returns the bolus (units, on top of basal) for the current step.
    virtual double observe(double cgm, double carbs_now, double insulin_prev) = 0;
    virtual void end_episode(double final_cgm) = 0;
    // Planner diagnostics for the episode log; absent for non-planning agents.
    virtual std::optional<double> last_chosen_multiplier() const { return std::nullopt; }
};

class BbAgent : public Agent {
public:
    explicit BbAgent(const BbParams& params) : params_(params) { params_.validate(); }

    void begin_episode(double) override {}
    double observe(double cgm, double carbs_now, double) override {
        return bb_dose(params_, cgm, carbs_now) - params_.bas;
    }
    void end_episode(double) override {}

    const BbParams& params() const { return params_; }

private:
    BbParams params_;
};

// Model-based controller: ESN ensemble learned online, MPC over the fixed
// action table. The first `warmup_episodes` episodes run the Basal-Bolus
// rule to gather survivable training data; the planner takes over once the
// warmup has elapsed and every member readout is fitted. Live states are
// advanced with realized actions one step in arrears (at the next observe,
// when the resulting CGM reading is known) and reset at episode start;
// readouts are refit from the accumulated buffer at each episode end.
class MbrlAgent : public Agent {
public:
    MbrlAgent(const EsnHyper& hyper, const GlucoseScaling& scaling, const BbParams& bootstrap,
              PlanningMode mode, double basal_rate, std::uint64_t seed, int members = 5,
              int warmup_episodes = 5, int horizon = kDefaultHorizon)
        : ensemble_(members, hyper, scaling, seed), bootstrap_(bootstrap), mode_(mode),
          table_(build_action_table(basal_rate, horizon)), warmup_episodes_(warmup_episodes) {
        bootstrap_.validate();
        if (warmup_episodes < 0) throw std::invalid_argument("MbrlAgent: warmup_episodes must be >= 0");
    }

    void begin_episode(double) override {
        ensemble_.reset_states();
        have_prev_ = false;
        chosen_multiplier_.reset();
        ++episode_;
    }

    double observe(double cgm, double carbs_now, double) override {
        if (have_prev_) ensemble_.observe(prev_bolus_, prev_carbs_, cgm);
        double bolus;
        if (episode_ > warmup_episodes_ && ensemble_.fitted()) {
            const Plan p = plan(ensemble_, table_, mode_);
            bolus = act(p);
            chosen_multiplier_ = p.chosen_multiplier;
        } else {
            bolus = bb_dose(bootstrap_, cgm, carbs_now) - bootstrap_.bas;
            chosen_multiplier_.reset();
        }
        prev_bolus_ = bolus;
        prev_carbs_ = carbs_now;
        have_prev_ = true;
        return bolus;
    }

    void end_episode(double final_cgm) override {
        if (have_prev_) ensemble_.observe(prev_bolus_, prev_carbs_, final_cgm);
        have_prev_ = false;
        ensemble_.fit();
    }

    std::optional<double> last_chosen_multiplier() const override { return chosen_multiplier_; }

    const EsnEnsemble& ensemble() const { return ensemble_; }
    EsnEnsemble& ensemble() { return ensemble_; }
    int episodes_seen() const { return episode_; }
    bool planning() const { return episode_ > warmup_episodes_ && ensemble_.fitted(); }
    PlanningMode mode() const { return mode_; }

private:
    EsnEnsemble ensemble_;
    BbParams bootstrap_;
    PlanningMode mode_;
    ActionTable table_;
    int warmup_episodes_;
    int episode_ = 0;
    bool have_prev_ = false;
    double prev_bolus_ = 0.0;
    double prev_carbs_ = 0.0;
    std::optional<double> chosen_multiplier_;
};

} // namespace glucoloop
