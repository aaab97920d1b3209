#ifndef DEMADS_DER_CONTROL_HPP
#define DEMADS_DER_CONTROL_HPP

#include <string>
#include <vector>

#include <json.hpp>

namespace demads::der {

enum class ControlCurveVariant { Correct, Wrong, Inverted };

const char* variant_name(ControlCurveVariant v);
ControlCurveVariant variant_from_name(const std::string& name);

// cosphi(P) law: unity power factor up to knee_p, then the power factor
// falls linearly to cosphi_end at end_p; above end_p the end power factor
// is held (inverter saturation).
struct CosPhiCurve {
    double knee_p = 0.5;
    double end_p = 1.0;
    double cosphi_end = 0.9; // underexcited at rated power

    void validate() const;
};

struct PvInverter {
    int bus = 0;
    double rated_kw = 0.0;
    ControlCurveVariant variant = ControlCurveVariant::Correct;
    CosPhiCurve curve;
};

// Reactive setpoint as a fraction of rated power. Sign convention:
// negative = underexcited / absorbing. p_frac < 0 is InvalidInput.
double reactive_setpoint(const CosPhiCurve& curve, double p_frac);

// Correct -> the curve; Wrong -> 0 everywhere; Inverted -> exact sign flip.
double variant_setpoint(const PvInverter& inverter, double p_frac);
double variant_setpoint(const CosPhiCurve& curve, ControlCurveVariant variant, double p_frac);

std::vector<PvInverter> pv_units_from_json(const nlohmann::json& grid_json);
nlohmann::json pv_units_to_json(const std::vector<PvInverter>& units);

} // namespace demads::der

#endif
