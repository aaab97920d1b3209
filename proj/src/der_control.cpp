#include "demads/der_control.hpp"

#include <cmath>

#include "demads/error.hpp"

namespace demads::der {

const char* variant_name(ControlCurveVariant v) {
    switch (v) {
    case ControlCurveVariant::Correct: return "Correct";
    case ControlCurveVariant::Wrong: return "Wrong";
    case ControlCurveVariant::Inverted: return "Inverted";
    }
    return "Correct";
}

ControlCurveVariant variant_from_name(const std::string& name) {
    if (name == "Correct") return ControlCurveVariant::Correct;
    if (name == "Wrong") return ControlCurveVariant::Wrong;
    if (name == "Inverted") return ControlCurveVariant::Inverted;
    throw Error(ErrKind::UnknownLabel, "unknown control curve variant '" + name + "'");
}

void CosPhiCurve::validate() const {
    if (!(0.0 <= knee_p && knee_p < end_p && end_p <= 1.0))
        throw Error(ErrKind::InvalidInput, "curve requires 0 <= knee_p < end_p <= 1");
    if (!(0.0 < cosphi_end && cosphi_end <= 1.0))
        throw Error(ErrKind::InvalidInput, "curve requires 0 < cosphi_end <= 1");
}

double reactive_setpoint(const CosPhiCurve& curve, double p_frac) {
    if (p_frac < 0.0 || !std::isfinite(p_frac))
        throw Error(ErrKind::InvalidInput, "p_frac must be a nonnegative fraction");
    if (p_frac <= curve.knee_p) return 0.0;
    const double p_eff = std::min(p_frac, curve.end_p);
    const double cosphi =
        1.0 + (curve.cosphi_end - 1.0) * (p_eff - curve.knee_p) / (curve.end_p - curve.knee_p);
    return -p_frac * std::tan(std::acos(cosphi));
}

double variant_setpoint(const CosPhiCurve& curve, ControlCurveVariant variant, double p_frac) {
    switch (variant) {
    case ControlCurveVariant::Correct:
        return reactive_setpoint(curve, p_frac);
    case ControlCurveVariant::Wrong:
        if (p_frac < 0.0 || !std::isfinite(p_frac))
            throw Error(ErrKind::InvalidInput, "p_frac must be a nonnegative fraction");
        return 0.0;
    case ControlCurveVariant::Inverted:
        return -reactive_setpoint(curve, p_frac);
    }
    return 0.0;
}

double variant_setpoint(const PvInverter& inverter, double p_frac) {
    return variant_setpoint(inverter.curve, inverter.variant, p_frac);
}

std::vector<PvInverter> pv_units_from_json(const nlohmann::json& grid_json) {
    std::vector<PvInverter> units;
    if (!grid_json.contains("pv_units")) return units;
    try {
        for (const auto& uj : grid_json.at("pv_units")) {
            PvInverter unit;
            unit.bus = uj.at("bus").get<int>();
            unit.rated_kw = uj.at("rated_kw").get<double>();
            unit.variant = variant_from_name(uj.value("variant", "Correct"));
            if (uj.contains("curve")) {
                const auto& cj = uj.at("curve");
                unit.curve.knee_p = cj.value("knee_p", 0.5);
                unit.curve.end_p = cj.value("end_p", 1.0);
                unit.curve.cosphi_end = cj.value("cosphi_end", 0.9);
            }
            unit.curve.validate();
            if (unit.rated_kw <= 0.0)
                throw Error(ErrKind::InvalidInput, "pv rated_kw must be positive");
            units.push_back(unit);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("pv_units json: ") + e.what());
    }
    return units;
}

nlohmann::json pv_units_to_json(const std::vector<PvInverter>& units) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& unit : units) {
        arr.push_back({{"bus", unit.bus},
                       {"rated_kw", unit.rated_kw},
                       {"variant", variant_name(unit.variant)},
                       {"curve",
                        {{"knee_p", unit.curve.knee_p},
                         {"end_p", unit.curve.end_p},
                         {"cosphi_end", unit.curve.cosphi_end}}}});
    }
    return arr;
}

} // namespace demads::der
