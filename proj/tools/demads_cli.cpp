// demads: misconfiguration detection pipeline for LV grids with PV
// inverters. Thin command-line front end over the C API (demads.h).
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "demads.h"

namespace {

int finish(demads_status status) {
    if (status != DEMADS_OK) std::fprintf(stderr, "demads: %s\n", demads_last_error());
    return static_cast<int>(status);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DeMaDs: data-driven malfunction detection for power distribution grids"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 ok, 1 usage, 2 parse/validation, 3 non-convergence, "
               "4 fingerprint mismatch, 5 io, 6 internal.\n"
               "DEMADS_LOG={error,info,debug} controls stderr verbosity.");

    unsigned long long seed = 0;
    app.add_option("--seed", seed, "global random seed")->capture_default_str();

    // gen-grid
    auto* gen = app.add_subcommand("gen-grid", "generate a random radial grid file");
    int buses = 8, feeders = 2, pv = 1;
    std::string gen_out;
    gen->add_option("--buses", buses, "bus count including the slack")->capture_default_str();
    gen->add_option("--feeders", feeders, "first-hop feeder count")->capture_default_str();
    gen->add_option("--pv", pv, "number of PV inverters")->capture_default_str();
    gen->add_option("--out", gen_out, "output grid JSON path")->required();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run a scenario file into measurement CSVs");
    std::string sim_config, sim_out;
    simulate->add_option("--config", sim_config, "scenario JSON path")->required();
    simulate->add_option("--out", sim_out, "output directory")->required();

    // train-estimator
    auto* train_est = app.add_subcommand("train-estimator",
                                         "train the load-estimation ANN for one grid");
    std::string te_grid, te_config, te_out;
    train_est->add_option("--grid", te_grid, "grid JSON path")->required();
    train_est->add_option("--config", te_config, "training config JSON (optional)");
    train_est->add_option("--out", te_out, "output estimator model path")->required();

    // pretrain-detector
    auto* pretrain = app.add_subcommand("pretrain-detector",
                                        "pre-train the device-level detector across grids");
    std::string pd_config, pd_out;
    pretrain->add_option("--config", pd_config, "pretraining manifest JSON")->required();
    pretrain->add_option("--out", pd_out, "output detector model path")->required();

    // monitor
    auto* monitor = app.add_subcommand("monitor", "calibrate and run the daily detection cycle");
    std::string mo_measurements, mo_grid, mo_estimator, mo_detector, mo_out;
    monitor->add_option("--measurements", mo_measurements, "measurement directory")->required();
    monitor->add_option("--grid", mo_grid, "grid JSON path")->required();
    monitor->add_option("--estimator", mo_estimator, "estimator model path")->required();
    monitor->add_option("--detector", mo_detector, "detector model path (optional)");
    monitor->add_option("--out", mo_out, "output directory")->required();

    // benchmark
    auto* benchmark = app.add_subcommand("benchmark", "run the detection benchmark matrix");
    std::string be_config, be_out;
    benchmark->add_option("--config", be_config, "benchmark manifest JSON")->required();
    benchmark->add_option("--out", be_out, "output directory")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score a saved SVM model on a dataset CSV");
    std::string ev_model, ev_dataset, ev_out, ev_format = "csv";
    evaluate->add_option("--model", ev_model, "SVM model JSON path")->required();
    evaluate->add_option("--dataset", ev_dataset, "dataset CSV path")->required();
    evaluate->add_option("--out", ev_out, "output directory")->required();
    evaluate->add_option("--format", ev_format, "csv, md or json")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed())
        return finish(demads_grid_generate(buses, feeders, pv, seed, gen_out.c_str()));
    if (simulate->parsed())
        return finish(demads_simulate(sim_config.c_str(), sim_out.c_str()));
    if (train_est->parsed())
        return finish(demads_train_estimator(te_grid.c_str(),
                                             te_config.empty() ? nullptr : te_config.c_str(),
                                             seed, te_out.c_str()));
    if (pretrain->parsed())
        return finish(demads_pretrain_detector(pd_config.c_str(), seed, pd_out.c_str()));
    if (monitor->parsed())
        return finish(demads_monitor(mo_measurements.c_str(), mo_grid.c_str(),
                                     mo_estimator.c_str(),
                                     mo_detector.empty() ? nullptr : mo_detector.c_str(),
                                     mo_out.c_str()));
    if (benchmark->parsed())
        return finish(demads_benchmark(be_config.c_str(), be_out.c_str()));
    if (evaluate->parsed())
        return finish(demads_evaluate(ev_model.c_str(), ev_dataset.c_str(), ev_out.c_str(),
                                      ev_format.c_str()));
    return 1;
}
