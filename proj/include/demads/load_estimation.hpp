#ifndef DEMADS_LOAD_ESTIMATION_HPP
#define DEMADS_LOAD_ESTIMATION_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "demads/der_control.hpp"
#include "demads/features.hpp"
#include "demads/grid.hpp"
#include "demads/nn.hpp"
#include "demads/tensor.hpp"

namespace demads::loadest {

// Disaggregates a substation record into per-bus active loads. Input
// order: substation channels, sin/cos time-of-day encoding, known total
// PV production (kW). Outputs are kW per non-slack bus, ascending bus id.
struct LoadEstimator {
    nn::Mlp mlp;
    std::vector<std::string> input_spec;
    std::vector<int> output_buses;
    features::Standardizer input_norm;
    features::Standardizer target_norm;
    std::string topology_fingerprint;
    double load_power_factor = 0.95;

    size_t input_dim() const { return input_spec.size(); }
    size_t output_dim() const { return output_buses.size(); }
};

struct SyntheticTrainingSet {
    Tensor inputs;  // n x input dim
    Tensor targets; // n x load buses, true loads in kW
    std::vector<std::string> input_spec;
    std::vector<int> output_buses;
    std::uint64_t generator_seed = 0;
    std::string topology_fingerprint;
};

// Dummy-data generator: per sample draws independent per-bus loads in
// [load_min_kw, load_max_kw], a PV operating point (common fraction of
// rated, Correct curve) and a time of day, solves the power flow and
// records (channels + time features + pv total, true loads).
// Non-converging draws are redrawn a bounded number of times.
SyntheticTrainingSet build_training_set(const grid::NetworkTopology& topology,
                                        const std::vector<der::PvInverter>& pv_units,
                                        size_t n_samples, double load_min_kw, double load_max_kw,
                                        std::uint64_t rng_seed);

struct EstimatorTrainOptions {
    std::vector<size_t> hidden{32, 32};
    nn::TrainConfig train{.optimizer = nn::OptimizerKind::Adam,
                          .lr = 1e-3,
                          .epochs = 200,
                          .batch_size = 32,
                          .loss = nn::LossKind::Mse,
                          .seed = 1};
    double load_power_factor = 0.95;
};

LoadEstimator train_estimator(const SyntheticTrainingSet& set,
                              const EstimatorTrainOptions& options);

// Estimates per-bus active loads (kW, clamped at >= 0) from one record.
// `record_channels` length must match the channel part of input_spec.
std::vector<double> estimate_loads(const LoadEstimator& estimator,
                                   std::span<const double> record_channels, double hour_of_day,
                                   double pv_total_kw);

nlohmann::json estimator_to_json(const LoadEstimator& estimator);
LoadEstimator estimator_from_json(const nlohmann::json& j);

} // namespace demads::loadest

#endif
