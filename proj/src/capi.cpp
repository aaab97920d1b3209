#include "demads.h"

#include <algorithm>
#include <memory>
#include <string>

#include "demads/error.hpp"
#include "demads/eval.hpp"
#include "demads/io.hpp"
#include "demads/load_estimation.hpp"
#include "demads/orchestrator.hpp"
#include "demads/pretrain.hpp"
#include "demads/rng.hpp"
#include "demads/rt_detector.hpp"
#include "demads/scenario.hpp"
#include "demads/svm.hpp"
#include "demads/synth.hpp"

using namespace demads;

namespace {

thread_local std::string g_last_error = "no error";

demads_status fail(Status status, const std::string& message) {
    g_last_error = message;
    return static_cast<demads_status>(static_cast<int>(status));
}

template <typename Fn>
demads_status wrap(Fn&& fn) {
    try {
        fn();
        return DEMADS_OK;
    } catch (const Error& e) {
        return fail(status_of(e.kind()), std::string(errkind_name(e.kind())) + ": " + e.what());
    } catch (const std::exception& e) {
        return fail(Status::Internal, e.what());
    } catch (...) {
        return fail(Status::Internal, "unknown failure");
    }
}

demads_status require(bool ok, const char* what) {
    if (ok) return DEMADS_OK;
    return fail(Status::Usage, std::string("invalid argument: ") + what);
}

} // namespace

struct demads_grid {
    grid::NetworkTopology topology;
    std::vector<der::PvInverter> pv_units;
    std::string fingerprint;
};

struct demads_estimator {
    loadest::LoadEstimator estimator;
};

struct demads_detector {
    rt::RtModel model;
};

extern "C" {

const char* demads_version(void) { return "0.1.0"; }

const char* demads_last_error(void) { return g_last_error.c_str(); }

demads_status demads_grid_generate(int buses, int feeders, int pv_units,
                                   unsigned long long seed, const char* out_path) {
    if (auto rc = require(out_path != nullptr, "out_path")) return rc;
    return wrap([&] {
        const auto j = synth::generate_grid_json(buses, feeders, pv_units, seed);
        io::write_json_file(out_path, j);
    });
}

demads_status demads_grid_open(const char* path, demads_grid** out) {
    if (auto rc = require(path && out, "path/out")) return rc;
    return wrap([&] {
        const auto j = io::read_json_file(path);
        auto handle = std::make_unique<demads_grid>();
        handle->topology = grid::topology_from_json(j);
        handle->pv_units = der::pv_units_from_json(j);
        handle->fingerprint = grid::topology_fingerprint(handle->topology);
        *out = handle.release();
    });
}

void demads_grid_close(demads_grid* grid) { delete grid; }

int demads_grid_bus_count(const demads_grid* grid) { return grid ? grid->topology.bus_count : 0; }

int demads_grid_line_count(const demads_grid* grid) {
    return grid ? static_cast<int>(grid->topology.lines.size()) : 0;
}

int demads_grid_pv_count(const demads_grid* grid) {
    return grid ? static_cast<int>(grid->pv_units.size()) : 0;
}

const char* demads_grid_fingerprint(const demads_grid* grid) {
    return grid ? grid->fingerprint.c_str() : "";
}

demads_status demads_simulate(const char* scenario_path, const char* out_dir) {
    if (auto rc = require(scenario_path && out_dir, "scenario_path/out_dir")) return rc;
    return wrap([&] {
        const auto config = sim::load_scenario(scenario_path);
        const auto measurements = sim::run_scenario(config);
        sim::write_measurements(out_dir, measurements);
    });
}

demads_status demads_train_estimator(const char* grid_path, const char* config_path,
                                     unsigned long long seed, const char* out_model_path) {
    if (auto rc = require(grid_path && out_model_path, "grid_path/out_model_path")) return rc;
    return wrap([&] {
        const auto grid_json = io::read_json_file(grid_path);
        const auto topology = grid::topology_from_json(grid_json);
        const auto pv_units = der::pv_units_from_json(grid_json);

        size_t samples = 1200;
        double load_min_kw = 0.0, load_max_kw = 8.0;
        loadest::EstimatorTrainOptions options;
        if (config_path) {
            const auto cj = io::read_json_file(config_path);
            samples = cj.value("samples", samples);
            load_min_kw = cj.value("load_min_kw", load_min_kw);
            load_max_kw = cj.value("load_max_kw", load_max_kw);
            if (cj.contains("hidden"))
                options.hidden = cj.at("hidden").get<std::vector<size_t>>();
            options.train.epochs = cj.value("epochs", options.train.epochs);
            options.train.lr = cj.value("lr", options.train.lr);
            options.train.batch_size = cj.value("batch_size", options.train.batch_size);
        }
        options.train.seed = rng::derive(seed, {0xe5717ULL});
        const auto set = loadest::build_training_set(topology, pv_units, samples, load_min_kw,
                                                     load_max_kw, rng::derive(seed, {0xda7aULL}));
        const auto estimator = loadest::train_estimator(set, options);
        io::write_json_file(out_model_path, loadest::estimator_to_json(estimator));
    });
}

demads_status demads_pretrain_detector(const char* manifest_path, unsigned long long seed,
                                       const char* out_model_path) {
    if (auto rc = require(manifest_path && out_model_path, "manifest_path/out_model_path"))
        return rc;
    return wrap([&] {
        const auto j = io::read_json_file(manifest_path);
        const auto manifest = rt::pretrain_manifest_from_json(
            j, std::filesystem::path(manifest_path).parent_path());
        const auto model = rt::run_pretraining(manifest, seed);
        io::write_json_file(out_model_path, rt::model_to_json(model));
    });
}

demads_status demads_monitor(const char* measurements_dir, const char* grid_path,
                             const char* estimator_path, const char* detector_path,
                             const char* out_dir) {
    if (auto rc = require(measurements_dir && grid_path && estimator_path && out_dir,
                          "measurements_dir/grid_path/estimator_path/out_dir"))
        return rc;
    return wrap([&] {
        const auto grid_json = io::read_json_file(grid_path);
        const auto topology = grid::topology_from_json(grid_json);
        const auto pv_units = der::pv_units_from_json(grid_json);
        const auto estimator = loadest::estimator_from_json(io::read_json_file(estimator_path));
        const auto measurements = sim::read_measurements(measurements_dir);

        rt::RtModel detector_model;
        orch::DetectorDeployment detectors;
        if (detector_path) {
            detector_model = rt::model_from_json(io::read_json_file(detector_path));
            for (const auto& unit : pv_units) detectors.push_back({unit.bus, &detector_model});
        }
        orch::MonitorConfig config;
        const auto result = orch::monitor_period(measurements, topology, pv_units, estimator,
                                                 detectors, config);
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path dir(out_dir);
        orch::write_report_jsonl(dir / "report.jsonl", result);
        orch::write_summary_md(dir / "summary.md", result);
        io::write_json_file(dir / "svm_final.json",
                            svm::multiclass_to_json(result.final_svm, &result.final_standardizer));
    });
}

demads_status demads_benchmark(const char* manifest_path, const char* out_dir) {
    if (auto rc = require(manifest_path && out_dir, "manifest_path/out_dir")) return rc;
    return wrap([&] {
        const auto manifest = eval::manifest_from_json(io::read_json_file(manifest_path));
        eval::run_benchmark(manifest, out_dir);
    });
}

demads_status demads_evaluate(const char* svm_model_path, const char* dataset_csv_path,
                              const char* out_dir, const char* format) {
    if (auto rc = require(svm_model_path && dataset_csv_path && out_dir, "paths")) return rc;
    const std::string fmt = format ? format : "csv";
    if (fmt != "csv" && fmt != "md" && fmt != "json")
        return fail(Status::Usage, "format must be csv, md or json");
    return wrap([&] { eval::evaluate_dataset(svm_model_path, dataset_csv_path, out_dir, fmt); });
}

demads_status demads_estimator_open(const char* path, demads_estimator** out) {
    if (auto rc = require(path && out, "path/out")) return rc;
    return wrap([&] {
        auto handle = std::make_unique<demads_estimator>();
        handle->estimator = loadest::estimator_from_json(io::read_json_file(path));
        *out = handle.release();
    });
}

void demads_estimator_close(demads_estimator* estimator) { delete estimator; }

int demads_estimator_channel_count(const demads_estimator* estimator) {
    return estimator ? static_cast<int>(estimator->estimator.input_spec.size() - 3) : 0;
}

int demads_estimator_output_count(const demads_estimator* estimator) {
    return estimator ? static_cast<int>(estimator->estimator.output_dim()) : 0;
}

demads_status demads_estimator_estimate(const demads_estimator* estimator, const double* record,
                                        int record_len, double hour_of_day, double pv_total_kw,
                                        double* out_loads, int out_len) {
    if (auto rc = require(estimator && record && out_loads, "estimator/record/out_loads"))
        return rc;
    return wrap([&] {
        const auto loads = loadest::estimate_loads(
            estimator->estimator, std::span<const double>(record, static_cast<size_t>(record_len)),
            hour_of_day, pv_total_kw);
        if (static_cast<int>(loads.size()) != out_len)
            throw Error(ErrKind::ShapeMismatch,
                        "out_len must be " + std::to_string(loads.size()));
        std::copy(loads.begin(), loads.end(), out_loads);
    });
}

demads_status demads_detector_open(const char* path, demads_detector** out) {
    if (auto rc = require(path && out, "path/out")) return rc;
    return wrap([&] {
        auto handle = std::make_unique<demads_detector>();
        handle->model = rt::model_from_json(io::read_json_file(path));
        *out = handle.release();
    });
}

void demads_detector_close(demads_detector* detector) { delete detector; }

int demads_detector_window_len(const demads_detector* detector) {
    return detector ? detector->model.config.seq_len : 0;
}

int demads_detector_class_count(const demads_detector* detector) {
    return detector ? detector->model.config.classes : 0;
}

demads_status demads_detector_classify(const demads_detector* detector, const double* window,
                                       int window_len, double* out_probs, int probs_len) {
    if (auto rc = require(detector && window && out_probs, "detector/window/out_probs")) return rc;
    return wrap([&] {
        const auto probs = rt::classify(
            detector->model, std::span<const double>(window, static_cast<size_t>(window_len)));
        if (static_cast<int>(probs.size()) != probs_len)
            throw Error(ErrKind::ShapeMismatch,
                        "probs_len must be " + std::to_string(probs.size()));
        std::copy(probs.begin(), probs.end(), out_probs);
    });
}

} // extern "C"
