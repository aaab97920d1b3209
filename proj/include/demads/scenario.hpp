#ifndef DEMADS_SCENARIO_HPP
#define DEMADS_SCENARIO_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "demads/der_control.hpp"
#include "demads/grid.hpp"
#include "demads/tensor.hpp"

namespace demads::sim {

// Daily household shape: base load plus morning/evening Gaussian bumps
// (centers fixed at 07:30 and 19:00) and seeded noise, floored at 0 kW.
struct LoadProfileModel {
    double base_kw = 0.0;
    double morning_peak_kw = 0.0;
    double evening_peak_kw = 0.0;
    double peak_width_h = 1.5;
    double noise_sigma_kw = 0.0;
    double power_factor = 0.95;
};

inline constexpr double kMorningPeakHour = 7.5;
inline constexpr double kEveningPeakHour = 19.0;

// Clear-sky sine-squared arc between sunrise and sunset with multiplicative
// cloud noise (factor clipped to [0, 1]).
struct IrradianceModel {
    double sunrise_h = 6.0;
    double sunset_h = 20.0;
    double peak_kw_per_kwp = 0.8;
    double cloud_noise_sigma = 0.0;
};

struct MalfunctionSchedule {
    int inverter_bus = 0;
    der::ControlCurveVariant variant = der::ControlCurveVariant::Wrong; // never Correct
    int start_day = 0;
};

struct ScenarioConfig {
    grid::NetworkTopology topology; // validated
    std::vector<der::PvInverter> pv_units;
    std::map<int, LoadProfileModel> load_models; // keyed by bus id
    IrradianceModel irradiance;
    int days = 1;
    int highres_step_s = 60;
    int meter_step_s = 900;
    std::optional<MalfunctionSchedule> schedule;
    std::uint64_t seed = 0;
    double slack_voltage = 1.0;
};

struct MeasurementSet {
    std::vector<std::string> channel_names;
    std::vector<int> meter_bus_ids; // all non-slack buses, ascending
    std::vector<int> pv_bus_ids;    // one per pv unit, unit order
    int highres_step_s = 60;
    int meter_step_s = 900;
    std::uint64_t seed = 0;
    std::optional<MalfunctionSchedule> schedule;
    std::string grid_fingerprint;
    double base_power_kva = 0.0;

    std::vector<Tensor> substation; // per day: timesteps x channels
    std::vector<Tensor> meters;     // per day: meter steps x meter buses, |V| pu
    std::vector<Tensor> pv_known;   // per day: timesteps x pv units, active kW

    int days() const { return static_cast<int>(substation.size()); }
};

// Active-power series (kW), one value per step. Deterministic in
// (model, day, step_s, rng_seed); throws InvalidCadence unless step_s
// divides 86400.
std::vector<double> generate_load_profile(const LoadProfileModel& model, int day, int step_s,
                                          std::uint64_t rng_seed);

std::vector<double> generate_pv_profile(const IrradianceModel& model, double capacity_kwp, int day,
                                        int step_s, std::uint64_t rng_seed);

// Solves one day of per-timestep power flows from explicit load / PV
// series. `load_p_kw`/`load_q_kw` are T x bus_count (column 0 ignored),
// `pv_p_kw` is T x pv units. `variants` overrides each unit's configured
// curve variant. When `meters_out` is non-null the per-bus |V| at every
// meter boundary is recorded (T must be a multiple of meter steps).
Tensor simulate_day(const grid::NetworkTopology& topology,
                    const std::vector<der::PvInverter>& pv_units,
                    const std::vector<der::ControlCurveVariant>& variants,
                    const Tensor& load_p_kw, const Tensor& load_q_kw, const Tensor& pv_p_kw,
                    double slack_voltage, int day_for_errors, Tensor* meters_out = nullptr,
                    int meter_ratio = 1);

MeasurementSet run_scenario(const ScenarioConfig& config);

// Scenario file: JSON mirror of ScenarioConfig with the grid referenced by
// path. Relative grid paths resolve against the scenario file's directory.
ScenarioConfig scenario_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// One CSV per day per stream plus metadata.json.
void write_measurements(const std::filesystem::path& dir, const MeasurementSet& set);
MeasurementSet read_measurements(const std::filesystem::path& dir);

} // namespace demads::sim

#endif
