#ifndef DEMADS_GRID_HPP
#define DEMADS_GRID_HPP

#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

namespace demads::grid {

using Complex = std::complex<double>;

struct Line {
    int from = 0;
    int to = 0;
    double r_pu = 0.0; // >= 0
    double x_pu = 0.0;
};

struct NetworkTopology {
    int bus_count = 0;
    std::vector<Line> lines;
    double base_voltage_v = 400.0;
    double base_power_kva = 250.0;

    // filled by validate(); bus 0 is always the slack
    bool validated = false;
    std::vector<int> parent;       // parent[0] = -1
    std::vector<int> bfs_order;    // root first
    std::vector<int> line_of_bus;  // line index feeding bus i (i != 0)

    // converts kW at base_power_kva to per-unit
    double kw_to_pu(double kw) const { return kw / base_power_kva; }
};

// Checks the radial-tree invariants and establishes a deterministic parent
// ordering (BFS from bus 0, neighbors visited in ascending bus id).
// Throws CycleDetected / DisconnectedBus / DuplicateLine / InvalidGrid.
NetworkTopology validate_topology(NetworkTopology topology);

struct PowerFlowResult {
    std::vector<Complex> voltages;      // per bus, pu
    std::vector<Complex> line_currents; // per line, oriented parent -> child, pu
    Complex losses;                     // total series losses, pu
    int iterations = 0;
    double residual = 0.0; // max per-bus voltage change at the last sweep
};

// Backward-forward sweep with constant-power buses. `demand` is per-bus
// complex power in pu with consumption positive (generation enters as
// negative demand); demand[0] is ignored. Throws NonConvergence when the
// 1e-8 pu voltage-change tolerance is not met within 100 iterations.
PowerFlowResult solve_power_flow(const NetworkTopology& topology,
                                 const std::vector<Complex>& demand,
                                 double slack_voltage = 1.0);

inline constexpr double kVoltageTolerance = 1e-8;
inline constexpr int kMaxIterations = 100;

// One substation snapshot: total P, total Q, slack current magnitude,
// slack voltage magnitude, then P and Q per first-hop feeder.
struct SubstationRecord {
    std::vector<double> values;
};

// Channel order matches SubstationRecord::values; feeders are ordered by
// their first-hop bus id.
std::vector<std::string> substation_channel_names(const NetworkTopology& topology);

SubstationRecord aggregate_substation(const PowerFlowResult& result,
                                      const NetworkTopology& topology);

// Grid file schema: {base_voltage_v, base_power_kva, buses:[{id}],
// lines:[{from,to,r_pu,x_pu}], pv_units:[...]}. PV entries are parsed by
// der_control; this loader validates the topology part.
NetworkTopology topology_from_json(const nlohmann::json& j);
nlohmann::json topology_to_json(const NetworkTopology& topology);

// FNV-1a over the canonical topology serialization; ties model artifacts
// to the grid they were trained for.
std::string topology_fingerprint(const NetworkTopology& topology);

} // namespace demads::grid

#endif
