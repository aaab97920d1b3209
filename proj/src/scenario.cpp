#include "demads/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "demads/error.hpp"
#include "demads/io.hpp"
#include "demads/rng.hpp"

namespace demads::sim {

namespace {

// substream tags for derive(); keep stable, they are part of the
// reproducibility contract
constexpr std::uint64_t kStreamLoad = 1;
constexpr std::uint64_t kStreamPv = 2;

int steps_per_day(int step_s) {
    if (step_s <= 0 || 86400 % step_s != 0)
        throw Error(ErrKind::InvalidCadence,
                    "step of " + std::to_string(step_s) + " s does not divide 86400");
    return 86400 / step_s;
}

std::string day_file(const std::string& stem, int day) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", day);
    return stem + "_day_" + buf + ".csv";
}

} // namespace

std::vector<double> generate_load_profile(const LoadProfileModel& model, int day, int step_s,
                                          std::uint64_t rng_seed) {
    const int steps = steps_per_day(step_s);
    (void)day; // day selects the rng substream upstream; the shape repeats daily
    rng::Stream stream(rng_seed);
    std::vector<double> series(steps);
    const double w2 = 2.0 * model.peak_width_h * model.peak_width_h;
    for (int t = 0; t < steps; ++t) {
        const double h = static_cast<double>(t) * step_s / 3600.0;
        double p = model.base_kw;
        if (model.peak_width_h > 0.0) {
            const double dm = h - kMorningPeakHour;
            const double de = h - kEveningPeakHour;
            p += model.morning_peak_kw * std::exp(-dm * dm / w2);
            p += model.evening_peak_kw * std::exp(-de * de / w2);
        }
        if (model.noise_sigma_kw > 0.0) p += stream.normal(0.0, model.noise_sigma_kw);
        series[t] = std::max(0.0, p);
    }
    return series;
}

std::vector<double> generate_pv_profile(const IrradianceModel& model, double capacity_kwp, int day,
                                        int step_s, std::uint64_t rng_seed) {
    const int steps = steps_per_day(step_s);
    (void)day;
    rng::Stream stream(rng_seed);
    std::vector<double> series(steps, 0.0);
    const double daylight = model.sunset_h - model.sunrise_h;
    for (int t = 0; t < steps; ++t) {
        const double h = static_cast<double>(t) * step_s / 3600.0;
        if (h <= model.sunrise_h || h >= model.sunset_h) continue;
        const double arc = std::sin(M_PI * (h - model.sunrise_h) / daylight);
        double p = capacity_kwp * model.peak_kw_per_kwp * arc * arc;
        if (model.cloud_noise_sigma > 0.0) {
            const double factor =
                std::clamp(1.0 + stream.normal(0.0, model.cloud_noise_sigma), 0.0, 1.0);
            p *= factor;
        }
        series[t] = p;
    }
    return series;
}

Tensor simulate_day(const grid::NetworkTopology& topology,
                    const std::vector<der::PvInverter>& pv_units,
                    const std::vector<der::ControlCurveVariant>& variants,
                    const Tensor& load_p_kw, const Tensor& load_q_kw, const Tensor& pv_p_kw,
                    double slack_voltage, int day_for_errors, Tensor* meters_out,
                    int meter_ratio) {
    const size_t steps = load_p_kw.rows();
    const size_t nbus = static_cast<size_t>(topology.bus_count);
    if (load_p_kw.cols() != nbus || load_q_kw.rows() != steps || load_q_kw.cols() != nbus)
        throw Error(ErrKind::ShapeMismatch, "load series shape mismatch");
    if (pv_p_kw.rows() != steps || pv_p_kw.cols() != pv_units.size())
        throw Error(ErrKind::ShapeMismatch, "pv series shape mismatch");
    if (variants.size() != pv_units.size())
        throw Error(ErrKind::ShapeMismatch, "one variant per pv unit required");

    const size_t channels = grid::substation_channel_names(topology).size();
    Tensor substation = Tensor::zeros({steps, channels});
    if (meters_out) {
        if (steps % static_cast<size_t>(meter_ratio) != 0)
            throw Error(ErrKind::InvalidCadence, "meter cadence must divide the high-res day");
        *meters_out = Tensor::zeros({steps / meter_ratio, nbus - 1});
    }

    std::vector<grid::Complex> demand(nbus);
    for (size_t t = 0; t < steps; ++t) {
        for (size_t b = 1; b < nbus; ++b)
            demand[b] = grid::Complex(topology.kw_to_pu(load_p_kw(t, b)),
                                      topology.kw_to_pu(load_q_kw(t, b)));
        for (size_t u = 0; u < pv_units.size(); ++u) {
            const auto& unit = pv_units[u];
            const double p_kw = pv_p_kw(t, u);
            const double p_frac = p_kw / unit.rated_kw;
            const double q_kw =
                der::variant_setpoint(unit.curve, variants[u], p_frac) * unit.rated_kw;
            demand[unit.bus] -= grid::Complex(topology.kw_to_pu(p_kw), topology.kw_to_pu(q_kw));
        }
        grid::PowerFlowResult flow;
        try {
            flow = grid::solve_power_flow(topology, demand, slack_voltage);
        } catch (const Error& e) {
            if (e.kind() == ErrKind::NonConvergence)
                throw Error(ErrKind::NonConvergence, "day " + std::to_string(day_for_errors) +
                                                         " timestep " + std::to_string(t) + ": " +
                                                         e.what());
            throw;
        }
        const auto record = grid::aggregate_substation(flow, topology);
        for (size_t c = 0; c < channels; ++c) substation(t, c) = record.values[c];
        if (meters_out && t % static_cast<size_t>(meter_ratio) == 0) {
            const size_t row = t / meter_ratio;
            for (size_t b = 1; b < nbus; ++b)
                (*meters_out)(row, b - 1) = std::abs(flow.voltages[b]);
        }
    }
    return substation;
}

MeasurementSet run_scenario(const ScenarioConfig& config) {
    if (!config.topology.validated)
        throw Error(ErrKind::InvalidGrid, "scenario topology not validated");
    if (config.days < 1)
        throw Error(ErrKind::InvalidScenario, "days must be >= 1");
    const int steps = steps_per_day(config.highres_step_s);
    if (config.meter_step_s % config.highres_step_s != 0)
        throw Error(ErrKind::InvalidCadence, "meter_step_s must be a multiple of highres_step_s");
    (void)steps_per_day(config.meter_step_s);
    const int ratio = config.meter_step_s / config.highres_step_s;
    if (config.schedule) {
        if (config.schedule->variant == der::ControlCurveVariant::Correct)
            throw Error(ErrKind::InvalidScenario, "schedule variant must be a malfunction");
        if (config.schedule->start_day < 0)
            throw Error(ErrKind::InvalidScenario, "schedule start_day must be >= 0");
        const bool has_unit =
            std::any_of(config.pv_units.begin(), config.pv_units.end(),
                        [&](const der::PvInverter& u) { return u.bus == config.schedule->inverter_bus; });
        if (!has_unit)
            throw Error(ErrKind::InvalidScenario, "schedule names a bus without a pv unit");
    }

    const size_t nbus = static_cast<size_t>(config.topology.bus_count);
    MeasurementSet set;
    set.channel_names = grid::substation_channel_names(config.topology);
    for (size_t b = 1; b < nbus; ++b) set.meter_bus_ids.push_back(static_cast<int>(b));
    for (const auto& unit : config.pv_units) set.pv_bus_ids.push_back(unit.bus);
    set.highres_step_s = config.highres_step_s;
    set.meter_step_s = config.meter_step_s;
    set.seed = config.seed;
    set.schedule = config.schedule;
    set.grid_fingerprint = grid::topology_fingerprint(config.topology);
    set.base_power_kva = config.topology.base_power_kva;

    for (int day = 0; day < config.days; ++day) {
        Tensor load_p = Tensor::zeros({static_cast<size_t>(steps), nbus});
        Tensor load_q = Tensor::zeros({static_cast<size_t>(steps), nbus});
        for (const auto& [bus, model] : config.load_models) {
            if (bus <= 0 || bus >= static_cast<int>(nbus))
                throw Error(ErrKind::InvalidScenario, "load model on invalid bus " + std::to_string(bus));
            const auto series = generate_load_profile(
                model, day, config.highres_step_s,
                rng::derive(config.seed, {kStreamLoad, static_cast<std::uint64_t>(day),
                                          static_cast<std::uint64_t>(bus)}));
            const double tan_phi = std::tan(std::acos(model.power_factor));
            for (int t = 0; t < steps; ++t) {
                load_p(t, bus) = series[t];
                load_q(t, bus) = series[t] * tan_phi;
            }
        }

        Tensor pv_p = Tensor::zeros({static_cast<size_t>(steps), config.pv_units.size()});
        std::vector<der::ControlCurveVariant> variants;
        for (size_t u = 0; u < config.pv_units.size(); ++u) {
            const auto& unit = config.pv_units[u];
            const auto series = generate_pv_profile(
                config.irradiance, unit.rated_kw, day, config.highres_step_s,
                rng::derive(config.seed, {kStreamPv, static_cast<std::uint64_t>(day),
                                          static_cast<std::uint64_t>(unit.bus)}));
            for (int t = 0; t < steps; ++t) pv_p(t, u) = series[t];
            der::ControlCurveVariant variant = unit.variant;
            if (config.schedule && day >= config.schedule->start_day &&
                unit.bus == config.schedule->inverter_bus)
                variant = config.schedule->variant;
            variants.push_back(variant);
        }

        Tensor meters;
        Tensor substation =
            simulate_day(config.topology, config.pv_units, variants, load_p, load_q, pv_p,
                         config.slack_voltage, day, &meters, ratio);
        set.substation.push_back(std::move(substation));
        set.meters.push_back(std::move(meters));
        set.pv_known.push_back(std::move(pv_p));
    }
    return set;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ScenarioConfig config;
    try {
        std::filesystem::path grid_path = j.at("grid_file").get<std::string>();
        if (grid_path.is_relative()) grid_path = base_dir / grid_path;
        const auto grid_json = io::read_json_file(grid_path);
        config.topology = grid::topology_from_json(grid_json);
        config.pv_units = der::pv_units_from_json(grid_json);

        config.days = j.value("days", 1);
        config.highres_step_s = j.value("highres_step_s", 60);
        config.meter_step_s = j.value("meter_step_s", 900);
        config.seed = j.value("seed", 0ULL);
        config.slack_voltage = j.value("slack_voltage_pu", 1.0);

        if (j.contains("irradiance")) {
            const auto& ij = j.at("irradiance");
            config.irradiance.sunrise_h = ij.value("sunrise_h", 6.0);
            config.irradiance.sunset_h = ij.value("sunset_h", 20.0);
            config.irradiance.peak_kw_per_kwp = ij.value("peak_kw_per_kwp", 0.8);
            config.irradiance.cloud_noise_sigma = ij.value("cloud_noise_sigma", 0.0);
        }
        if (j.contains("load_models")) {
            for (const auto& [key, mj] : j.at("load_models").items()) {
                LoadProfileModel model;
                model.base_kw = mj.value("base_kw", 0.0);
                model.morning_peak_kw = mj.value("morning_peak_kw", 0.0);
                model.evening_peak_kw = mj.value("evening_peak_kw", 0.0);
                model.peak_width_h = mj.value("peak_width_h", 1.5);
                model.noise_sigma_kw = mj.value("noise_sigma_kw", 0.0);
                model.power_factor = mj.value("power_factor", 0.95);
                if (model.base_kw < 0 || model.morning_peak_kw < 0 || model.evening_peak_kw < 0 ||
                    model.noise_sigma_kw < 0 || model.power_factor <= 0 || model.power_factor > 1)
                    throw Error(ErrKind::InvalidScenario, "invalid load model for bus " + key);
                config.load_models[std::stoi(key)] = model;
            }
        }
        if (j.contains("schedule") && !j.at("schedule").is_null()) {
            const auto& sj = j.at("schedule");
            MalfunctionSchedule schedule;
            schedule.inverter_bus = sj.at("inverter_bus").get<int>();
            schedule.variant = der::variant_from_name(sj.at("variant").get<std::string>());
            schedule.start_day = sj.at("start_day").get<int>();
            config.schedule = schedule;
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("scenario json: ") + e.what());
    }
    const auto& irr = config.irradiance;
    if (!(0.0 <= irr.sunrise_h && irr.sunrise_h < irr.sunset_h && irr.sunset_h <= 24.0) ||
        !(irr.peak_kw_per_kwp > 0.0 && irr.peak_kw_per_kwp <= 1.0))
        throw Error(ErrKind::InvalidScenario, "invalid irradiance model");
    return config;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    return scenario_from_json(io::read_json_file(path), path.parent_path());
}

void write_measurements(const std::filesystem::path& dir, const MeasurementSet& set) {
    std::filesystem::create_directories(dir);

    nlohmann::json meta;
    meta["days"] = set.days();
    meta["highres_step_s"] = set.highres_step_s;
    meta["meter_step_s"] = set.meter_step_s;
    meta["seed"] = set.seed;
    meta["channel_names"] = set.channel_names;
    meta["meter_bus_ids"] = set.meter_bus_ids;
    meta["pv_bus_ids"] = set.pv_bus_ids;
    meta["grid_fingerprint"] = set.grid_fingerprint;
    meta["base_power_kva"] = set.base_power_kva;
    if (set.schedule)
        meta["schedule"] = {{"inverter_bus", set.schedule->inverter_bus},
                            {"variant", der::variant_name(set.schedule->variant)},
                            {"start_day", set.schedule->start_day}};
    else
        meta["schedule"] = nullptr;
    io::write_json_file(dir / "metadata.json", meta);

    for (int day = 0; day < set.days(); ++day) {
        io::CsvTable sub;
        sub.header.push_back("timestamp_s");
        for (const auto& name : set.channel_names) sub.header.push_back(name);
        const Tensor& mat = set.substation[day];
        for (size_t t = 0; t < mat.rows(); ++t) {
            std::vector<double> row{static_cast<double>(t) * set.highres_step_s};
            for (size_t c = 0; c < mat.cols(); ++c) row.push_back(mat(t, c));
            sub.rows.push_back(std::move(row));
        }
        io::write_csv(dir / day_file("substation", day), sub);

        io::CsvTable met;
        met.header.push_back("timestamp_s");
        for (int bus : set.meter_bus_ids) met.header.push_back("bus_" + std::to_string(bus));
        const Tensor& mm = set.meters[day];
        for (size_t t = 0; t < mm.rows(); ++t) {
            std::vector<double> row{static_cast<double>(t) * set.meter_step_s};
            for (size_t c = 0; c < mm.cols(); ++c) row.push_back(mm(t, c));
            met.rows.push_back(std::move(row));
        }
        io::write_csv(dir / day_file("meters", day), met);

        io::CsvTable pv;
        pv.header.push_back("timestamp_s");
        for (int bus : set.pv_bus_ids) pv.header.push_back("pv_bus_" + std::to_string(bus));
        const Tensor& pm = set.pv_known[day];
        for (size_t t = 0; t < pm.rows(); ++t) {
            std::vector<double> row{static_cast<double>(t) * set.highres_step_s};
            for (size_t c = 0; c < pm.cols(); ++c) row.push_back(pm(t, c));
            pv.rows.push_back(std::move(row));
        }
        io::write_csv(dir / day_file("pv", day), pv);
    }
}

MeasurementSet read_measurements(const std::filesystem::path& dir) {
    const auto meta = io::read_json_file(dir / "metadata.json");
    MeasurementSet set;
    int days = 0;
    try {
        days = meta.at("days").get<int>();
        set.highres_step_s = meta.at("highres_step_s").get<int>();
        set.meter_step_s = meta.at("meter_step_s").get<int>();
        set.seed = meta.at("seed").get<std::uint64_t>();
        set.channel_names = meta.at("channel_names").get<std::vector<std::string>>();
        set.meter_bus_ids = meta.at("meter_bus_ids").get<std::vector<int>>();
        set.pv_bus_ids = meta.at("pv_bus_ids").get<std::vector<int>>();
        set.grid_fingerprint = meta.at("grid_fingerprint").get<std::string>();
        set.base_power_kva = meta.at("base_power_kva").get<double>();
        if (meta.contains("schedule") && !meta.at("schedule").is_null()) {
            const auto& sj = meta.at("schedule");
            MalfunctionSchedule schedule;
            schedule.inverter_bus = sj.at("inverter_bus").get<int>();
            schedule.variant = der::variant_from_name(sj.at("variant").get<std::string>());
            schedule.start_day = sj.at("start_day").get<int>();
            set.schedule = schedule;
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("measurement metadata: ") + e.what());
    }

    auto load_matrix = [&](const std::string& stem, int day, size_t expect_cols) {
        const auto table = io::read_csv(dir / day_file(stem, day));
        if (table.header.size() != expect_cols + 1)
            throw Error(ErrKind::ParseError, stem + " csv column count mismatch");
        Tensor mat = Tensor::zeros({table.rows.size(), expect_cols});
        for (size_t t = 0; t < table.rows.size(); ++t)
            for (size_t c = 0; c < expect_cols; ++c) mat(t, c) = table.rows[t][c + 1];
        return mat;
    };
    for (int day = 0; day < days; ++day) {
        set.substation.push_back(load_matrix("substation", day, set.channel_names.size()));
        set.meters.push_back(load_matrix("meters", day, set.meter_bus_ids.size()));
        set.pv_known.push_back(load_matrix("pv", day, set.pv_bus_ids.size()));
    }
    return set;
}

} // namespace demads::sim
