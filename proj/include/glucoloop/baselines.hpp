#pragma once

// Basal-Bolus reference controller. Pure dose rule:
//   dose = bas + 1[c_t > 0] * (c_t/CR + 1[b_t > 150] * (b_t - b_tgt)/CF)
// The hyperglycemia correction applies only alongside a meal; between meals
// the controller delivers basal alone.

#include "glucoloop/patient.hpp"

#include <stdexcept>

namespace glucoloop {

struct BbParams {
    double bas = 0.1;     // units per step
    double cr = 10.0;     // grams per unit
    double cf = 40.0;     // mg/dl per unit
    double b_tgt = 120.0; // mg/dl

    void validate() const {
        if (!(cr > 0.0) || !(cf > 0.0)) throw std::invalid_argument("BbParams: CR and CF must be positive");
        if (!(bas >= 0.0)) throw std::invalid_argument("BbParams: bas must be >= 0");
        if (!(b_tgt > 0.0)) throw std::invalid_argument("BbParams: b_tgt must be positive");
    }
};

// Total dose for this step (basal included), from the CGM reading b_t and
// the carbs c_t announced at this step.
inline double bb_dose(const BbParams& p, double b_t, double c_t) {
    if (!(b_t > 0.0)) throw std::invalid_argument("bb_dose: CGM reading must be positive");
    if (!(c_t >= 0.0)) throw std::invalid_argument("bb_dose: carbs must be >= 0");
    double dose = p.bas;
    if (c_t > 0.0) {
        dose += c_t / p.cr;
        if (b_t > 150.0) dose += (b_t - p.b_tgt) / p.cf;
    }
    return dose;
}

// CR/CF from the patient's physiology. One unit of insulin clears roughly
// ref_bg * SI / ke mg/dl of glucose (integrated remote action against
// first-order clearance); dividing by the per-gram glucose rise gives the
// grams one unit covers. aggressiveness > 1 doses more insulin per meal.
inline BbParams derive_bb_params(const PatientParams& patient, double ref_bg = 130.0,
                                 double aggressiveness = 1.0) {
    if (!(ref_bg > 0.0) || !(aggressiveness > 0.0))
        throw std::invalid_argument("derive_bb_params: ref_bg and aggressiveness must be positive");
    const double potency = ref_bg * patient.insulin_sensitivity / patient.insulin_clearance_rate;
    BbParams p;
    p.bas = patient.basal_rate;
    p.cr = potency / patient.carb_gain() / aggressiveness;
    p.cf = potency;
    p.b_tgt = 120.0;
    p.validate();
    return p;
}

} // namespace glucoloop
