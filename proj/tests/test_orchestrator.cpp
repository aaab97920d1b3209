#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "demads/error.hpp"
#include "demads/io.hpp"
#include "demads/orchestrator.hpp"
#include "demads/rng.hpp"
#include "demads/synth.hpp"

using namespace demads;
using features::Label;
using orch::FusionVerdict;

namespace {

struct Fixture {
    grid::NetworkTopology topology;
    std::vector<der::PvInverter> pv_units;
    loadest::LoadEstimator estimator;
    sim::ScenarioConfig scenario;
};

// one estimator + scenario, shared across cases (training is the slow part)
const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture fx;
        fx.topology = synth::generate_topology(6, 3, 321);
        fx.pv_units = synth::assign_pv_units(fx.topology, 1, 321);
        const auto set = loadest::build_training_set(fx.topology, fx.pv_units, 500, 0.0, 7.0, 5);
        loadest::EstimatorTrainOptions options;
        options.train.epochs = 80;
        options.train.seed = 6;
        fx.estimator = loadest::train_estimator(set, options);
        fx.scenario = synth::default_scenario(fx.topology, fx.pv_units, 1, 321, 11);
        fx.scenario.highres_step_s = 300;
        return fx;
    }();
    return f;
}

orch::MonitorConfig small_config() {
    orch::MonitorConfig config;
    config.window_capacity = 6; // smaller window keeps protocol tests quick
    return config;
}

sim::MeasurementSet measured_days(int days, std::uint64_t run_seed,
                                  std::optional<sim::MalfunctionSchedule> schedule = {}) {
    auto scenario = fixture().scenario;
    scenario.days = days;
    scenario.seed = run_seed;
    scenario.schedule = schedule;
    return sim::run_scenario(scenario);
}

rt::DeviceFlag flag(int bus, Label cls, double p, int day = 0) {
    return rt::DeviceFlag{bus, cls, p, day};
}

} // namespace

TEST_CASE("fusion rule table") {
    const auto consistent = orch::fuse(Label::Correct, {});
    CHECK(consistent.kind == FusionVerdict::Kind::ConsistentCorrect);

    const auto confirmed = orch::fuse(Label::Inverted, {flag(7, Label::Inverted, 0.93)});
    CHECK(confirmed.kind == FusionVerdict::Kind::ConfirmedLocalized);
    CHECK(confirmed.bus == 7);
    CHECK(confirmed.malfunction == Label::Inverted);

    const auto transformer_only = orch::fuse(Label::Wrong, {});
    CHECK(transformer_only.kind == FusionVerdict::Kind::TransformerOnly);
    CHECK(transformer_only.malfunction == Label::Wrong);

    const auto device_only = orch::fuse(Label::Correct, {flag(3, Label::Wrong, 0.7)});
    CHECK(device_only.kind == FusionVerdict::Kind::DeviceOnly);
    CHECK(device_only.bus == 3);
    CHECK(device_only.malfunction == Label::Wrong);

    const auto contradiction = orch::fuse(Label::Wrong, {flag(3, Label::Inverted, 0.8)});
    CHECK(contradiction.kind == FusionVerdict::Kind::Contradiction);
    CHECK(!contradiction.details.empty());
}

TEST_CASE("fusion with multiple flags: highest probability decides") {
    const auto verdict = orch::fuse(
        Label::Inverted,
        {flag(3, Label::Wrong, 0.6), flag(7, Label::Inverted, 0.9), flag(4, Label::Inverted, 0.7)});
    CHECK(verdict.kind == FusionVerdict::Kind::ConfirmedLocalized);
    CHECK(verdict.bus == 7);
    CHECK(verdict.flags.size() == 3);
    CHECK(verdict.details.find("bus 3") != std::string::npos); // others listed

    // probability tie: lowest bus id wins
    const auto tie = orch::fuse(Label::Wrong, {flag(9, Label::Wrong, 0.8), flag(2, Label::Wrong, 0.8)});
    CHECK(tie.bus == 2);
}

TEST_CASE("calibration builds 1 measured + |classes| simulated samples per day") {
    const auto& f = fixture();
    auto config = small_config();
    orch::TransformerPipeline pipeline(f.topology, f.pv_units, f.estimator, config);
    pipeline.calibrate(measured_days(config.window_capacity, 100));
    CHECK(pipeline.window_size() == 6);
    CHECK(pipeline.training_set_size() == 6 * 3); // Correct + Wrong + Inverted per day
    const auto counts = pipeline.training_class_counts();
    CHECK(counts.at("Correct") == 6);
    CHECK(counts.at("Wrong") == 6);
    CHECK(counts.at("Inverted") == 6);
}

TEST_CASE("calibration with fewer days is incomplete") {
    const auto& f = fixture();
    auto config = small_config();
    orch::TransformerPipeline pipeline(f.topology, f.pv_units, f.estimator, config);
    try {
        pipeline.calibrate(measured_days(config.window_capacity - 1, 100));
        FAIL("expected CalibrationIncomplete");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::CalibrationIncomplete);
    }
}

TEST_CASE("counterfactual simulation consumes exactly the estimated loads") {
    const auto& f = fixture();
    const auto measurements = measured_days(1, 101);
    const auto pack = orch::build_day_pack(f.topology, f.pv_units, f.estimator,
                                           measurements.substation[0], measurements.pv_known[0], 0,
                                           measurements.highres_step_s, {Label::Inverted}, 1.0);
    REQUIRE(pack.counterfactuals.size() == 1);

    // rebuild the counterfactual from the estimates alone; it must agree
    const auto [load_p, load_q] =
        orch::estimate_day_loads(f.topology, f.pv_units, f.estimator, measurements.substation[0],
                                 measurements.pv_known[0], measurements.highres_step_s);
    const std::vector<der::ControlCurveVariant> variants(f.pv_units.size(),
                                                         der::ControlCurveVariant::Inverted);
    const auto simulated = sim::simulate_day(f.topology, f.pv_units, variants, load_p, load_q,
                                             measurements.pv_known[0], 1.0, 0);
    const auto expected = features::condense_day(simulated);
    CHECK(pack.counterfactuals[0].features == expected);
    CHECK(pack.counterfactuals[0].provenance == features::Provenance::Simulated);
    CHECK(pack.measured.provenance == features::Provenance::Measured);
}

TEST_CASE("daily cycle: correct days roll the window FIFO") {
    const auto& f = fixture();
    auto config = small_config();
    orch::TransformerPipeline pipeline(f.topology, f.pv_units, f.estimator, config);
    const auto measurements = measured_days(9, 102);
    pipeline.calibrate(measurements);
    CHECK(pipeline.window_days() == std::vector<int>{0, 1, 2, 3, 4, 5});

    for (int day = 6; day < 9; ++day) {
        const auto report = pipeline.run_daily_cycle(measurements.substation[day],
                                                     measurements.pv_known[day], day);
        CHECK(report.transformer_verdict == Label::Correct);
        CHECK(report.window_size_after == 6); // capacity kept, oldest evicted
    }
    CHECK(pipeline.window_days() == std::vector<int>{3, 4, 5, 6, 7, 8});
}

TEST_CASE("daily cycle: a malfunction day leaves window and classifier untouched") {
    const auto& f = fixture();
    auto config = small_config();
    orch::TransformerPipeline pipeline(f.topology, f.pv_units, f.estimator, config);
    pipeline.calibrate(measured_days(6, 103));
    const auto days_before = pipeline.window_days();

    const auto bad = measured_days(
        1, 104, sim::MalfunctionSchedule{f.pv_units[0].bus, der::ControlCurveVariant::Inverted, 0});
    const auto report = pipeline.run_daily_cycle(bad.substation[0], bad.pv_known[0], 6);
    CHECK(report.transformer_verdict == Label::Inverted);
    CHECK(pipeline.window_days() == days_before); // unchanged contents
    CHECK(report.window_size_after == days_before.size());
}

TEST_CASE("monitor period: fingerprint mismatches are rejected") {
    const auto& f = fixture();
    const auto other_topology = synth::generate_topology(6, 3, 999);
    const auto measurements = measured_days(8, 105);
    try {
        orch::monitor_period(measurements, other_topology, f.pv_units, f.estimator, {},
                             small_config());
        FAIL("expected FingerprintMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::FingerprintMismatch);
    }
}

TEST_CASE("monitor period: device detectors see only their own meter column") {
    const auto& f = fixture();
    auto config = small_config();
    config.detector_threshold = 0.0; // untrained model always flags: plumbing test
    rt::RtConfig rt_config;
    rt_config.window_w = 4;
    rt_config.model_dim = 4;
    rt_config.heads = 2;
    rt_config.seq_len = 96;
    const auto model = rt::make_model(rt_config, 9);
    orch::DetectorDeployment detectors{{f.pv_units[0].bus, &model}};

    const auto full = measured_days(8, 106);
    // censor every other bus's meter column
    sim::MeasurementSet censored = full;
    const auto it = std::find(full.meter_bus_ids.begin(), full.meter_bus_ids.end(),
                              f.pv_units[0].bus);
    const size_t col = static_cast<size_t>(it - full.meter_bus_ids.begin());
    censored.meter_bus_ids = {f.pv_units[0].bus};
    for (auto& day : censored.meters) {
        Tensor only = Tensor::zeros({day.rows(), 1});
        for (size_t t = 0; t < day.rows(); ++t) only(t, 0) = day(t, col);
        day = only;
    }

    const auto a = orch::monitor_period(full, f.topology, f.pv_units, f.estimator, detectors, config);
    const auto b =
        orch::monitor_period(censored, f.topology, f.pv_units, f.estimator, detectors, config);
    REQUIRE(a.verdicts.size() == b.verdicts.size());
    for (size_t i = 0; i < a.verdicts.size(); ++i) {
        REQUIRE(a.verdicts[i].flags.size() == b.verdicts[i].flags.size());
        for (size_t k = 0; k < a.verdicts[i].flags.size(); ++k) {
            CHECK(a.verdicts[i].flags[k].bus == b.verdicts[i].flags[k].bus);
            CHECK(a.verdicts[i].flags[k].probability == b.verdicts[i].flags[k].probability);
        }
        CHECK(a.reports[i].transformer_verdict == b.reports[i].transformer_verdict);
    }
}

TEST_CASE("report writers emit one line per monitored day") {
    const auto& f = fixture();
    const auto measurements = measured_days(8, 107);
    const auto result = orch::monitor_period(measurements, f.topology, f.pv_units, f.estimator,
                                             {}, small_config());
    REQUIRE(result.reports.size() == 2);

    const auto dir = std::filesystem::temp_directory_path() / "demads_report_test";
    std::filesystem::create_directories(dir);
    orch::write_report_jsonl(dir / "report.jsonl", result);
    const auto text = io::read_text_file(dir / "report.jsonl");
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
    CHECK(first.at("day") == 6);
    CHECK(first.contains("transformer_verdict"));
    CHECK(first.contains("fusion"));
    CHECK(first.contains("window_size"));
    CHECK(first.contains("training_counts"));
    std::filesystem::remove_all(dir);
}
