#ifndef DEMADS_SYNTH_HPP
#define DEMADS_SYNTH_HPP

#include <cstdint>
#include <map>

#include <json.hpp>

#include "demads/der_control.hpp"
#include "demads/grid.hpp"
#include "demads/scenario.hpp"

namespace demads::synth {

// Random radial LV feeder layout: bus 0 is the substation, `feeders`
// first-hop children, remaining buses attach to random non-slack buses.
// Line impedances are drawn from LV cable-like per-unit ranges.
grid::NetworkTopology generate_topology(int buses, int feeders, std::uint64_t seed);

// PV units go to the deepest buses (feeder ends), rated 20-35 kW.
std::vector<der::PvInverter> assign_pv_units(const grid::NetworkTopology& topology, int count,
                                             std::uint64_t seed);

nlohmann::json generate_grid_json(int buses, int feeders, int pv_count, std::uint64_t seed);

// Household-like load models for every non-slack bus.
std::map<int, sim::LoadProfileModel> default_load_models(const grid::NetworkTopology& topology,
                                                         std::uint64_t seed);

// model_seed fixes the household parameters (stable per grid), run_seed
// drives the day-to-day noise streams.
sim::ScenarioConfig default_scenario(const grid::NetworkTopology& topology,
                                     const std::vector<der::PvInverter>& pv_units, int days,
                                     std::uint64_t model_seed, std::uint64_t run_seed);

} // namespace demads::synth

#endif
