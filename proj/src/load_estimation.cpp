#include "demads/load_estimation.hpp"

#include <cmath>

#include "demads/error.hpp"
#include "demads/rng.hpp"

namespace demads::loadest {

namespace {

std::vector<std::string> make_input_spec(const grid::NetworkTopology& topology) {
    auto spec = grid::substation_channel_names(topology);
    spec.push_back("time_sin");
    spec.push_back("time_cos");
    spec.push_back("pv_total_kw");
    return spec;
}

} // namespace

SyntheticTrainingSet build_training_set(const grid::NetworkTopology& topology,
                                        const std::vector<der::PvInverter>& pv_units,
                                        size_t n_samples, double load_min_kw, double load_max_kw,
                                        std::uint64_t rng_seed) {
    if (!topology.validated)
        throw Error(ErrKind::InvalidGrid, "topology not validated");
    if (n_samples < 1)
        throw Error(ErrKind::InvalidInput, "n_samples must be >= 1");
    if (load_min_kw < 0.0 || load_max_kw < load_min_kw)
        throw Error(ErrKind::InvalidInput, "invalid load range");

    SyntheticTrainingSet set;
    set.input_spec = make_input_spec(topology);
    for (int b = 1; b < topology.bus_count; ++b) set.output_buses.push_back(b);
    set.generator_seed = rng_seed;
    set.topology_fingerprint = grid::topology_fingerprint(topology);

    const size_t dim = set.input_spec.size();
    const size_t nbus = set.output_buses.size();
    set.inputs = Tensor::zeros({n_samples, dim});
    set.targets = Tensor::zeros({n_samples, nbus});

    std::vector<grid::Complex> demand(topology.bus_count);
    for (size_t s = 0; s < n_samples; ++s) {
        constexpr int kMaxRetries = 8;
        bool done = false;
        for (int attempt = 0; attempt < kMaxRetries && !done; ++attempt) {
            rng::Stream stream(rng::derive(rng_seed, {s, static_cast<std::uint64_t>(attempt)}));
            const double hour = stream.uniform(0.0, 24.0);
            const double pv_frac = stream.uniform01();

            std::fill(demand.begin(), demand.end(), grid::Complex(0.0, 0.0));
            for (size_t bi = 0; bi < nbus; ++bi) {
                const double p_kw = stream.uniform(load_min_kw, load_max_kw);
                const double q_kw = p_kw * std::tan(std::acos(0.95));
                set.targets(s, bi) = p_kw;
                demand[set.output_buses[bi]] +=
                    grid::Complex(topology.kw_to_pu(p_kw), topology.kw_to_pu(q_kw));
            }
            double pv_total_kw = 0.0;
            for (const auto& unit : pv_units) {
                const double p_kw = pv_frac * unit.rated_kw;
                const double q_kw = der::reactive_setpoint(unit.curve, pv_frac) * unit.rated_kw;
                pv_total_kw += p_kw;
                demand[unit.bus] -= grid::Complex(topology.kw_to_pu(p_kw), topology.kw_to_pu(q_kw));
            }
            try {
                const auto flow = grid::solve_power_flow(topology, demand);
                const auto record = grid::aggregate_substation(flow, topology);
                for (size_t c = 0; c < record.values.size(); ++c) set.inputs(s, c) = record.values[c];
                set.inputs(s, dim - 3) = std::sin(2.0 * M_PI * hour / 24.0);
                set.inputs(s, dim - 2) = std::cos(2.0 * M_PI * hour / 24.0);
                set.inputs(s, dim - 1) = pv_total_kw;
                done = true;
            } catch (const Error& e) {
                if (e.kind() != ErrKind::NonConvergence || attempt + 1 == kMaxRetries) throw;
            }
        }
    }
    return set;
}

LoadEstimator train_estimator(const SyntheticTrainingSet& set,
                              const EstimatorTrainOptions& options) {
    const size_t n = set.inputs.rows();
    if (n < 2)
        throw Error(ErrKind::TooFewSamples, "training set needs >= 2 samples");

    auto rows_of = [](const Tensor& t) {
        std::vector<std::vector<double>> rows(t.rows());
        for (size_t i = 0; i < t.rows(); ++i)
            rows[i].assign(&t.data[i * t.cols()], &t.data[i * t.cols()] + t.cols());
        return rows;
    };
    LoadEstimator estimator;
    estimator.input_spec = set.input_spec;
    estimator.output_buses = set.output_buses;
    estimator.topology_fingerprint = set.topology_fingerprint;
    estimator.load_power_factor = options.load_power_factor;
    estimator.input_norm = features::fit_standardizer(rows_of(set.inputs));
    estimator.target_norm = features::fit_standardizer(rows_of(set.targets));

    Tensor nx = Tensor::zeros({set.inputs.rows(), set.inputs.cols()});
    Tensor nt = Tensor::zeros({set.targets.rows(), set.targets.cols()});
    for (size_t i = 0; i < n; ++i) {
        for (size_t c = 0; c < set.inputs.cols(); ++c)
            nx(i, c) = (set.inputs(i, c) - estimator.input_norm.mean[c]) /
                       estimator.input_norm.std_dev[c];
        for (size_t c = 0; c < set.targets.cols(); ++c)
            nt(i, c) = (set.targets(i, c) - estimator.target_norm.mean[c]) /
                       estimator.target_norm.std_dev[c];
    }

    std::vector<size_t> dims{set.input_spec.size()};
    std::vector<nn::Activation> acts;
    for (size_t h : options.hidden) {
        dims.push_back(h);
        acts.push_back(nn::Activation::Tanh);
    }
    dims.push_back(set.output_buses.size());
    acts.push_back(nn::Activation::Identity);
    estimator.mlp = nn::make_mlp(dims, acts, options.train.seed);
    nn::train(estimator.mlp, nx, nt, options.train);
    return estimator;
}

std::vector<double> estimate_loads(const LoadEstimator& estimator,
                                   std::span<const double> record_channels, double hour_of_day,
                                   double pv_total_kw) {
    if (record_channels.size() + 3 != estimator.input_spec.size())
        throw Error(ErrKind::SpecMismatch,
                    "record has " + std::to_string(record_channels.size()) + " channels, estimator expects " +
                        std::to_string(estimator.input_spec.size() - 3));
    std::vector<double> input(record_channels.begin(), record_channels.end());
    input.push_back(std::sin(2.0 * M_PI * hour_of_day / 24.0));
    input.push_back(std::cos(2.0 * M_PI * hour_of_day / 24.0));
    input.push_back(pv_total_kw);

    const auto normalized = features::apply(estimator.input_norm, input);
    const auto raw = nn::forward_vec(estimator.mlp, normalized);
    auto loads = features::invert(estimator.target_norm, raw);
    for (auto& v : loads) v = std::max(0.0, v); // loads are consumption
    return loads;
}

nlohmann::json estimator_to_json(const LoadEstimator& estimator) {
    return {{"format_version", 1},
            {"kind", "load_estimator"},
            {"mlp", nn::mlp_to_json(estimator.mlp)},
            {"input_spec", estimator.input_spec},
            {"output_buses", estimator.output_buses},
            {"normalizer",
             {{"input", features::standardizer_to_json(estimator.input_norm)},
              {"target", features::standardizer_to_json(estimator.target_norm)}}},
            {"topology_fingerprint", estimator.topology_fingerprint},
            {"load_power_factor", estimator.load_power_factor}};
}

LoadEstimator estimator_from_json(const nlohmann::json& j) {
    LoadEstimator estimator;
    try {
        if (j.at("kind").get<std::string>() != "load_estimator" ||
            j.at("format_version").get<int>() != 1)
            throw Error(ErrKind::ParseError, "not a v1 load_estimator file");
        estimator.mlp = nn::mlp_from_json(j.at("mlp"));
        estimator.input_spec = j.at("input_spec").get<std::vector<std::string>>();
        estimator.output_buses = j.at("output_buses").get<std::vector<int>>();
        estimator.input_norm = features::standardizer_from_json(j.at("normalizer").at("input"));
        estimator.target_norm = features::standardizer_from_json(j.at("normalizer").at("target"));
        estimator.topology_fingerprint = j.at("topology_fingerprint").get<std::string>();
        estimator.load_power_factor = j.value("load_power_factor", 0.95);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("estimator json: ") + e.what());
    }
    if (estimator.mlp.input_dim() != estimator.input_spec.size() ||
        estimator.mlp.output_dim() != estimator.output_buses.size())
        throw Error(ErrKind::ParseError, "estimator specs inconsistent with network dims");
    return estimator;
}

} // namespace demads::loadest
