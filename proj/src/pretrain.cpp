#include "demads/pretrain.hpp"

#include <algorithm>

#include "demads/error.hpp"
#include "demads/io.hpp"
#include "demads/rng.hpp"
#include "demads/scenario.hpp"
#include "demads/synth.hpp"

namespace demads::rt {

PretrainManifest pretrain_manifest_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir) {
    PretrainManifest manifest;
    try {
        manifest.use_case = features::label_from_name(j.value("use_case", "Inverted"));
        for (const auto& gj : j.at("grids")) {
            PretrainGridSpec spec;
            if (gj.contains("grid_file")) {
                std::filesystem::path p = gj.at("grid_file").get<std::string>();
                if (p.is_relative()) p = base_dir / p;
                spec.grid_file = p.string();
            } else {
                spec.buses = gj.value("buses", 8);
                spec.feeders = gj.value("feeders", 2);
                spec.pv_count = gj.value("pv_count", 1);
                spec.grid_seed = gj.value("grid_seed", 1ULL);
            }
            spec.scenario_seed = gj.value("scenario_seed", 1ULL);
            manifest.grids.push_back(std::move(spec));
        }
        manifest.days_per_class = j.value("days_per_class", 20);
        if (j.contains("rt")) {
            const auto& rj = j.at("rt");
            manifest.rt.window_w = rj.value("window_w", 8);
            manifest.rt.model_dim = rj.value("model_dim", 16);
            manifest.rt.heads = rj.value("heads", 2);
            manifest.rt.blocks = rj.value("blocks", 1);
            manifest.rt.seq_len = rj.value("seq_len", 96);
        }
        if (j.contains("train")) {
            const auto& tj = j.at("train");
            manifest.train.epochs = tj.value("epochs", 60);
            manifest.train.lr = tj.value("lr", 1e-3);
            manifest.train.batch_size = tj.value("batch_size", 16);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("pretrain manifest: ") + e.what());
    }
    if (manifest.grids.size() < 2)
        throw Error(ErrKind::InvalidInput, "pretraining manifest needs multiple grids");
    if (manifest.days_per_class < 1)
        throw Error(ErrKind::InvalidInput, "days_per_class must be >= 1");
    manifest.rt.validate();
    return manifest;
}

std::vector<MeterWindow> build_pretrain_windows(const PretrainGridSpec& spec,
                                                features::Label use_case, int days_per_class,
                                                std::uint64_t seed, bool randomize_conditions) {
    grid::NetworkTopology topology;
    std::vector<der::PvInverter> pv_units;
    if (spec.grid_file) {
        const auto grid_json = io::read_json_file(*spec.grid_file);
        topology = grid::topology_from_json(grid_json);
        pv_units = der::pv_units_from_json(grid_json);
    } else {
        topology = synth::generate_topology(spec.buses, spec.feeders, spec.grid_seed);
        pv_units = synth::assign_pv_units(topology, spec.pv_count, spec.grid_seed);
    }
    if (pv_units.empty())
        throw Error(ErrKind::InvalidInput, "pretraining grid has no pv units");

    der::ControlCurveVariant malfunction;
    switch (use_case) {
    case features::Label::Wrong: malfunction = der::ControlCurveVariant::Wrong; break;
    case features::Label::Inverted: malfunction = der::ControlCurveVariant::Inverted; break;
    default:
        throw Error(ErrKind::UnknownLabel, "use case must be a malfunction class");
    }
    const std::string fingerprint = grid::topology_fingerprint(topology);

    // Domain randomization: the same grid is simulated under several slack
    // setpoints (tap positions differ between substations), so absolute
    // voltage level carries no class information and the model has to key
    // on the daily shape.
    const int blocks = randomize_conditions ? 10 : 1;

    std::vector<MeterWindow> windows;
    for (int label = 0; label <= 1; ++label) {
        for (int block = 0; block < blocks; ++block) {
            const int block_days = days_per_class / blocks + (block < days_per_class % blocks);
            if (block_days == 0) continue;
            const std::uint64_t block_seed =
                rng::derive(seed, {spec.scenario_seed, static_cast<std::uint64_t>(label),
                                   static_cast<std::uint64_t>(block)});
            auto config = synth::default_scenario(topology, pv_units, block_days,
                                                  spec.scenario_seed, block_seed);
            if (randomize_conditions) {
                // block conditions depend on the block only, never on the
                // label; varying tap position, season and weather
                // decorrelates the absolute voltage rise from the class
                rng::Stream conditions(rng::derive(seed, {spec.scenario_seed, 0x51acULL,
                                                          static_cast<std::uint64_t>(block)}));
                config.slack_voltage = conditions.uniform(0.985, 1.015);
                config.irradiance.peak_kw_per_kwp = conditions.uniform(0.60, 0.95);
                config.irradiance.cloud_noise_sigma = conditions.uniform(0.06, 0.18);
                const double load_scale = conditions.uniform(0.8, 1.3);
                for (auto& [bus, model] : config.load_models) {
                    model.base_kw *= load_scale;
                    model.morning_peak_kw *= load_scale;
                    model.evening_peak_kw *= load_scale;
                }
            }
            if (label == 1)
                for (auto& unit : config.pv_units) unit.variant = malfunction;
            const auto measurements = sim::run_scenario(config);
            for (int day = 0; day < block_days; ++day) {
                const Tensor& meters = measurements.meters[day];
                for (const auto& unit : pv_units) {
                    const auto it = std::find(measurements.meter_bus_ids.begin(),
                                              measurements.meter_bus_ids.end(), unit.bus);
                    const size_t col =
                        static_cast<size_t>(it - measurements.meter_bus_ids.begin());
                    MeterWindow window;
                    window.bus = unit.bus;
                    window.day = block * (days_per_class / blocks) + day;
                    window.label = label;
                    window.grid_fingerprint = fingerprint;
                    window.values.resize(meters.rows());
                    for (size_t t = 0; t < meters.rows(); ++t) window.values[t] = meters(t, col);
                    windows.push_back(std::move(window));
                }
            }
        }
    }
    return windows;
}

RtModel run_pretraining(const PretrainManifest& manifest, std::uint64_t seed) {
    std::vector<MeterWindow> dataset;
    for (const auto& spec : manifest.grids) {
        auto windows =
            build_pretrain_windows(spec, manifest.use_case, manifest.days_per_class, seed);
        dataset.insert(dataset.end(), std::make_move_iterator(windows.begin()),
                       std::make_move_iterator(windows.end()));
    }
    RtModel model = make_model(manifest.rt, rng::derive(seed, {0x30de1ULL}), manifest.use_case);
    auto train = manifest.train;
    train.loss = nn::LossKind::CrossEntropy;
    train.seed = rng::derive(seed, {0x7247ULL});
    pretrain(model, dataset, train);
    return model;
}

} // namespace demads::rt
