#include "demads/synth.hpp"

#include <algorithm>

#include "demads/error.hpp"
#include "demads/rng.hpp"

namespace demads::synth {

grid::NetworkTopology generate_topology(int buses, int feeders, std::uint64_t seed) {
    if (buses < 2)
        throw Error(ErrKind::Usage, "grid generation needs at least 2 buses");
    if (feeders < 1) feeders = 1;
    feeders = std::min(feeders, buses - 1);

    rng::Stream stream(rng::derive(seed, {0x91dULL}));
    grid::NetworkTopology t;
    t.bus_count = buses;
    t.base_voltage_v = 400.0;
    t.base_power_kva = 250.0;

    auto draw_line = [&](int from, int to) {
        grid::Line line;
        line.from = from;
        line.to = to;
        line.r_pu = stream.uniform(0.010, 0.040);
        line.x_pu = line.r_pu * stream.uniform(0.50, 1.00);
        return line;
    };
    for (int b = 1; b <= feeders; ++b) t.lines.push_back(draw_line(0, b));
    for (int b = feeders + 1; b < buses; ++b) {
        const int parent = 1 + static_cast<int>(stream.below(static_cast<std::uint64_t>(b - 1)));
        t.lines.push_back(draw_line(parent, b));
    }
    return grid::validate_topology(std::move(t));
}

std::vector<der::PvInverter> assign_pv_units(const grid::NetworkTopology& topology, int count,
                                             std::uint64_t seed) {
    rng::Stream stream(rng::derive(seed, {0x9fULL}));
    // depth of each bus along the tree
    std::vector<int> depth(topology.bus_count, 0);
    for (int b : topology.bfs_order)
        if (b != 0) depth[b] = depth[topology.parent[b]] + 1;
    std::vector<int> order;
    for (int b = 1; b < topology.bus_count; ++b) order.push_back(b);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (depth[a] != depth[b]) return depth[a] > depth[b];
        return a < b;
    });

    std::vector<der::PvInverter> units;
    count = std::min<int>(count, static_cast<int>(order.size()));
    for (int i = 0; i < count; ++i) {
        der::PvInverter unit;
        unit.bus = order[i];
        // hosting-capacity sizing: interconnection practice caps the PV
        // voltage rise, so the rating scales inversely with the reactance
        // of the path back to the substation
        double x_path = 0.0;
        for (int b = unit.bus; b != 0; b = topology.parent[b])
            x_path += topology.lines[topology.line_of_bus[b]].x_pu;
        const double rise_target = stream.uniform(0.0045, 0.0065); // pu at rated reactive swing
        const double rated_pu = rise_target / std::max(0.58 * x_path, 1e-6);
        unit.rated_kw = std::clamp(rated_pu * topology.base_power_kva, 15.0, 100.0);
        unit.variant = der::ControlCurveVariant::Correct;
        units.push_back(unit);
    }
    std::sort(units.begin(), units.end(),
              [](const der::PvInverter& a, const der::PvInverter& b) { return a.bus < b.bus; });
    return units;
}

nlohmann::json generate_grid_json(int buses, int feeders, int pv_count, std::uint64_t seed) {
    const auto topology = generate_topology(buses, feeders, seed);
    const auto units = assign_pv_units(topology, pv_count, seed);
    nlohmann::json j = grid::topology_to_json(topology);
    j["pv_units"] = der::pv_units_to_json(units);
    return j;
}

std::map<int, sim::LoadProfileModel> default_load_models(const grid::NetworkTopology& topology,
                                                         std::uint64_t seed) {
    std::map<int, sim::LoadProfileModel> models;
    for (int b = 1; b < topology.bus_count; ++b) {
        rng::Stream stream(rng::derive(seed, {0x10adULL, static_cast<std::uint64_t>(b)}));
        sim::LoadProfileModel model;
        model.base_kw = stream.uniform(0.8, 1.5);
        model.morning_peak_kw = stream.uniform(0.5, 1.5);
        model.evening_peak_kw = stream.uniform(1.5, 3.0);
        model.peak_width_h = stream.uniform(1.2, 2.2);
        model.noise_sigma_kw = stream.uniform(0.15, 0.35);
        model.power_factor = 0.95;
        models[b] = model;
    }
    return models;
}

sim::ScenarioConfig default_scenario(const grid::NetworkTopology& topology,
                                     const std::vector<der::PvInverter>& pv_units, int days,
                                     std::uint64_t model_seed, std::uint64_t run_seed) {
    sim::ScenarioConfig config;
    config.topology = topology;
    config.pv_units = pv_units;
    config.load_models = default_load_models(topology, model_seed);
    config.irradiance.sunrise_h = 6.0;
    config.irradiance.sunset_h = 20.0;
    config.irradiance.peak_kw_per_kwp = 0.8;
    config.irradiance.cloud_noise_sigma = 0.12;
    config.days = days;
    config.seed = run_seed;
    return config;
}

} // namespace demads::synth
