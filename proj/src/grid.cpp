#include "demads/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "demads/error.hpp"
#include "demads/io.hpp"

namespace demads::grid {

NetworkTopology validate_topology(NetworkTopology topology) {
    const int n = topology.bus_count;
    if (n < 1)
        throw Error(ErrKind::InvalidGrid, "topology needs at least the slack bus");

    std::set<std::pair<int, int>> seen;
    for (const auto& line : topology.lines) {
        if (line.from < 0 || line.from >= n || line.to < 0 || line.to >= n)
            throw Error(ErrKind::InvalidGrid, "line endpoint out of range");
        if (line.from == line.to)
            throw Error(ErrKind::CycleDetected, "self-loop on bus " + std::to_string(line.from));
        if (line.r_pu < 0.0 || !std::isfinite(line.r_pu) || !std::isfinite(line.x_pu))
            throw Error(ErrKind::InvalidGrid, "line impedance must be finite with r >= 0");
        auto key = std::minmax(line.from, line.to);
        if (!seen.insert(key).second)
            throw Error(ErrKind::DuplicateLine,
                        "duplicate line between buses " + std::to_string(key.first) + " and " +
                            std::to_string(key.second));
    }

    // adjacency with ascending neighbor order for a deterministic BFS
    std::vector<std::vector<std::pair<int, int>>> adj(n); // (neighbor, line index)
    for (size_t li = 0; li < topology.lines.size(); ++li) {
        const auto& line = topology.lines[li];
        adj[line.from].push_back({line.to, static_cast<int>(li)});
        adj[line.to].push_back({line.from, static_cast<int>(li)});
    }
    for (auto& nb : adj) std::sort(nb.begin(), nb.end());

    topology.parent.assign(n, -1);
    topology.line_of_bus.assign(n, -1);
    topology.bfs_order.clear();
    std::vector<char> visited(n, 0);
    std::deque<int> queue{0};
    visited[0] = 1;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        topology.bfs_order.push_back(u);
        for (const auto& [v, li] : adj[u]) {
            if (li == topology.line_of_bus[u]) continue; // tree edge back to parent
            if (visited[v])
                throw Error(ErrKind::CycleDetected, "cycle through bus " + std::to_string(v));
            visited[v] = 1;
            topology.parent[v] = u;
            topology.line_of_bus[v] = li;
            queue.push_back(v);
        }
    }
    for (int b = 0; b < n; ++b)
        if (!visited[b])
            throw Error(ErrKind::DisconnectedBus, "bus " + std::to_string(b) + " unreachable from slack");

    topology.validated = true;
    return topology;
}

PowerFlowResult solve_power_flow(const NetworkTopology& topology,
                                 const std::vector<Complex>& demand,
                                 double slack_voltage) {
    if (!topology.validated)
        throw Error(ErrKind::InvalidGrid, "topology not validated");
    const int n = topology.bus_count;
    if (static_cast<int>(demand.size()) != n)
        throw Error(ErrKind::ShapeMismatch, "demand vector length != bus count");

    PowerFlowResult result;
    result.voltages.assign(n, Complex(slack_voltage, 0.0));
    result.line_currents.assign(topology.lines.size(), Complex(0.0, 0.0));

    // bus injection current of the constant-power model: I = conj(S / V),
    // flowing out of the network into the load
    std::vector<Complex> bus_current(n);
    std::vector<Complex> branch_current(n); // indexed by child bus

    for (int iter = 1; iter <= kMaxIterations; ++iter) {
        for (int b = 1; b < n; ++b) {
            const Complex v = result.voltages[b];
            bus_current[b] = std::abs(v) > 0.0 ? std::conj(demand[b] / v) : Complex(0.0, 0.0);
        }
        // backward sweep: accumulate subtree currents leaf -> root
        for (int b = 1; b < n; ++b) branch_current[b] = bus_current[b];
        for (auto it = topology.bfs_order.rbegin(); it != topology.bfs_order.rend(); ++it) {
            const int b = *it;
            if (b == 0) continue;
            const int p = topology.parent[b];
            if (p != 0) branch_current[p] += branch_current[b];
        }
        // forward sweep: update voltages root -> leaf
        double max_change = 0.0;
        for (int b : topology.bfs_order) {
            if (b == 0) continue;
            const auto& line = topology.lines[topology.line_of_bus[b]];
            const Complex z(line.r_pu, line.x_pu);
            const Complex v_new = result.voltages[topology.parent[b]] - z * branch_current[b];
            const double change = std::abs(v_new - result.voltages[b]);
            max_change = std::max(max_change, change);
            result.voltages[b] = v_new;
        }
        result.iterations = iter;
        result.residual = max_change;
        if (std::isfinite(max_change) && max_change < kVoltageTolerance) {
            for (int b = 1; b < n; ++b)
                result.line_currents[topology.line_of_bus[b]] = branch_current[b];
            result.losses = Complex(0.0, 0.0);
            for (size_t li = 0; li < topology.lines.size(); ++li) {
                const auto& line = topology.lines[li];
                const double i2 = std::norm(result.line_currents[li]);
                result.losses += Complex(line.r_pu * i2, line.x_pu * i2);
            }
            return result;
        }
    }
    throw Error(ErrKind::NonConvergence,
                "power flow did not converge, residual " + io::format_double(result.residual));
}

std::vector<std::string> substation_channel_names(const NetworkTopology& topology) {
    std::vector<std::string> names{"p_total", "q_total", "i_slack", "v_slack"};
    for (int b = 1; b < topology.bus_count; ++b) {
        if (topology.parent[b] == 0) {
            names.push_back("p_feeder_" + std::to_string(b));
            names.push_back("q_feeder_" + std::to_string(b));
        }
    }
    return names;
}

SubstationRecord aggregate_substation(const PowerFlowResult& result,
                                      const NetworkTopology& topology) {
    const Complex v0 = result.voltages[0];
    Complex slack_current(0.0, 0.0);
    std::vector<double> feeder_pq;
    for (int b = 1; b < topology.bus_count; ++b) {
        if (topology.parent[b] != 0) continue;
        const Complex i = result.line_currents[topology.line_of_bus[b]];
        slack_current += i;
        const Complex s = v0 * std::conj(i);
        feeder_pq.push_back(s.real());
        feeder_pq.push_back(s.imag());
    }
    const Complex s_total = v0 * std::conj(slack_current);

    SubstationRecord record;
    record.values = {s_total.real(), s_total.imag(), std::abs(slack_current), std::abs(v0)};
    record.values.insert(record.values.end(), feeder_pq.begin(), feeder_pq.end());
    return record;
}

NetworkTopology topology_from_json(const nlohmann::json& j) {
    NetworkTopology t;
    try {
        t.base_voltage_v = j.at("base_voltage_v").get<double>();
        t.base_power_kva = j.at("base_power_kva").get<double>();
        std::set<int> ids;
        for (const auto& bus : j.at("buses")) ids.insert(bus.at("id").get<int>());
        t.bus_count = static_cast<int>(ids.size());
        for (int b = 0; b < t.bus_count; ++b)
            if (!ids.count(b))
                throw Error(ErrKind::InvalidGrid, "bus ids must be 0..n-1, missing " + std::to_string(b));
        for (const auto& lj : j.at("lines")) {
            Line line;
            line.from = lj.at("from").get<int>();
            line.to = lj.at("to").get<int>();
            line.r_pu = lj.at("r_pu").get<double>();
            line.x_pu = lj.at("x_pu").get<double>();
            t.lines.push_back(line);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("grid json: ") + e.what());
    }
    if (t.base_voltage_v <= 0.0 || t.base_power_kva <= 0.0)
        throw Error(ErrKind::InvalidGrid, "base quantities must be positive");
    return validate_topology(std::move(t));
}

nlohmann::json topology_to_json(const NetworkTopology& topology) {
    nlohmann::json j;
    j["base_voltage_v"] = topology.base_voltage_v;
    j["base_power_kva"] = topology.base_power_kva;
    j["buses"] = nlohmann::json::array();
    for (int b = 0; b < topology.bus_count; ++b) j["buses"].push_back({{"id", b}});
    j["lines"] = nlohmann::json::array();
    for (const auto& line : topology.lines)
        j["lines"].push_back(
            {{"from", line.from}, {"to", line.to}, {"r_pu", line.r_pu}, {"x_pu", line.x_pu}});
    return j;
}

std::string topology_fingerprint(const NetworkTopology& topology) {
    std::string canonical = std::to_string(topology.bus_count) + ";" +
                            io::format_double(topology.base_voltage_v) + ";" +
                            io::format_double(topology.base_power_kva);
    // canonical line order: by (min endpoint, max endpoint)
    std::vector<Line> sorted = topology.lines;
    std::sort(sorted.begin(), sorted.end(), [](const Line& a, const Line& b) {
        auto ka = std::minmax(a.from, a.to);
        auto kb = std::minmax(b.from, b.to);
        return ka < kb;
    });
    for (const auto& line : sorted) {
        auto k = std::minmax(line.from, line.to);
        canonical += ";" + std::to_string(k.first) + "," + std::to_string(k.second) + "," +
                     io::format_double(line.r_pu) + "," + io::format_double(line.x_pu);
    }
    return io::fnv1a_hex(canonical);
}

} // namespace demads::grid
