#include "demads/orchestrator.hpp"

#include <algorithm>
#include <cmath>

#include "demads/error.hpp"
#include "demads/io.hpp"

namespace demads::orch {

const char* fusion_kind_name(FusionVerdict::Kind kind) {
    switch (kind) {
    case FusionVerdict::Kind::ConsistentCorrect: return "ConsistentCorrect";
    case FusionVerdict::Kind::ConfirmedLocalized: return "ConfirmedLocalized";
    case FusionVerdict::Kind::TransformerOnly: return "TransformerOnly";
    case FusionVerdict::Kind::DeviceOnly: return "DeviceOnly";
    case FusionVerdict::Kind::Contradiction: return "Contradiction";
    }
    return "ConsistentCorrect";
}

FusionVerdict fuse(features::Label transformer_verdict, const std::vector<rt::DeviceFlag>& flags) {
    FusionVerdict verdict;
    verdict.flags = flags;

    const rt::DeviceFlag* best = nullptr;
    for (const auto& flag : flags) {
        if (!best || flag.probability > best->probability ||
            (flag.probability == best->probability && flag.bus < best->bus))
            best = &flag;
    }
    if (flags.size() > 1) {
        verdict.details = "flags:";
        for (const auto& flag : flags)
            verdict.details += " bus " + std::to_string(flag.bus) + " " +
                               features::label_name(flag.use_case) + " p=" +
                               io::format_double(flag.probability) + ";";
    }

    if (transformer_verdict == features::Label::Correct) {
        if (!best) {
            verdict.kind = FusionVerdict::Kind::ConsistentCorrect;
        } else {
            verdict.kind = FusionVerdict::Kind::DeviceOnly;
            verdict.bus = best->bus;
            verdict.malfunction = best->use_case;
        }
        return verdict;
    }
    if (!best) {
        verdict.kind = FusionVerdict::Kind::TransformerOnly;
        verdict.malfunction = transformer_verdict;
        return verdict;
    }
    if (best->use_case == transformer_verdict) {
        verdict.kind = FusionVerdict::Kind::ConfirmedLocalized;
        verdict.bus = best->bus;
        verdict.malfunction = transformer_verdict;
    } else {
        verdict.kind = FusionVerdict::Kind::Contradiction;
        verdict.bus = best->bus;
        verdict.malfunction = transformer_verdict;
        verdict.details = "transformer says " +
                          std::string(features::label_name(transformer_verdict)) +
                          ", strongest flag says " +
                          std::string(features::label_name(best->use_case)) + " at bus " +
                          std::to_string(best->bus) + "; " + verdict.details;
    }
    return verdict;
}

std::pair<Tensor, Tensor> estimate_day_loads(const grid::NetworkTopology& topology,
                                             const std::vector<der::PvInverter>& pv_units,
                                             const loadest::LoadEstimator& estimator,
                                             const Tensor& substation_day, const Tensor& pv_day,
                                             int highres_step_s) {
    const size_t steps = substation_day.rows();
    const size_t nbus = static_cast<size_t>(topology.bus_count);

    // first-hop ancestor of every bus, and the p channel of each feeder head
    std::vector<int> head_of_bus(nbus, -1);
    for (int b : topology.bfs_order) {
        if (b == 0) continue;
        head_of_bus[b] = topology.parent[b] == 0 ? b : head_of_bus[topology.parent[b]];
    }
    std::map<int, size_t> p_channel_of_head;
    size_t channel = 4;
    for (int b = 1; b < topology.bus_count; ++b)
        if (topology.parent[b] == 0) {
            p_channel_of_head[b] = channel;
            channel += 2;
        }

    Tensor load_p = Tensor::zeros({steps, nbus});
    Tensor load_q = Tensor::zeros({steps, nbus});
    const double tan_phi = std::tan(std::acos(estimator.load_power_factor));
    std::vector<double> channels(substation_day.cols());
    for (size_t t = 0; t < steps; ++t) {
        for (size_t c = 0; c < channels.size(); ++c) channels[c] = substation_day(t, c);
        double pv_total = 0.0;
        for (size_t u = 0; u < pv_units.size(); ++u) pv_total += pv_day(t, u);
        const double hour = static_cast<double>(t) * highres_step_s / 3600.0;
        const auto loads = loadest::estimate_loads(estimator, channels, hour, pv_total);

        // reconcile per feeder: estimated loads must add up to the measured
        // head power plus the known PV production behind that head
        std::map<int, double> load_sum, target;
        for (size_t bi = 0; bi < loads.size(); ++bi)
            load_sum[head_of_bus[estimator.output_buses[bi]]] += loads[bi];
        for (const auto& [head, pc] : p_channel_of_head)
            target[head] = substation_day(t, pc);
        for (size_t u = 0; u < pv_units.size(); ++u)
            target[head_of_bus[pv_units[u].bus]] +=
                topology.kw_to_pu(pv_day(t, u)); // head P is net of PV infeed
        std::map<int, int> bus_count;
        for (int bus : estimator.output_buses) bus_count[head_of_bus[bus]] += 1;

        for (size_t bi = 0; bi < loads.size(); ++bi) {
            const int bus = estimator.output_buses[bi];
            const int head = head_of_bus[bus];
            const double target_kw = std::max(0.0, target[head]) * topology.base_power_kva;
            double p;
            if (load_sum[head] > 1e-9) {
                p = loads[bi] * target_kw / load_sum[head];
            } else {
                p = target_kw / static_cast<double>(bus_count[head]);
            }
            load_p(t, bus) = p;
            load_q(t, bus) = p * tan_phi;
        }
    }
    return {std::move(load_p), std::move(load_q)};
}

DayPack build_day_pack(const grid::NetworkTopology& topology,
                       const std::vector<der::PvInverter>& pv_units,
                       const loadest::LoadEstimator& estimator, const Tensor& substation_day,
                       const Tensor& pv_day, int day, int highres_step_s,
                       const std::vector<features::Label>& malfunction_classes,
                       double slack_voltage) {
    const size_t steps = substation_day.rows();
    if (pv_day.rows() != steps || pv_day.cols() != pv_units.size())
        throw Error(ErrKind::ShapeMismatch, "pv series does not match the substation day");

    DayPack pack;
    pack.measured.features = features::condense_day(substation_day);
    pack.measured.label = features::Label::Correct;
    pack.measured.day = day;
    pack.measured.provenance = features::Provenance::Measured;

    auto [load_p, load_q] = estimate_day_loads(topology, pv_units, estimator, substation_day,
                                               pv_day, highres_step_s);

    for (features::Label cls : malfunction_classes) {
        der::ControlCurveVariant variant;
        switch (cls) {
        case features::Label::Wrong: variant = der::ControlCurveVariant::Wrong; break;
        case features::Label::Inverted: variant = der::ControlCurveVariant::Inverted; break;
        default:
            throw Error(ErrKind::UnknownLabel, "counterfactual class must be a malfunction");
        }
        const std::vector<der::ControlCurveVariant> variants(pv_units.size(), variant);
        const Tensor simulated = sim::simulate_day(topology, pv_units, variants, load_p, load_q,
                                                   pv_day, slack_voltage, day);
        features::DailySample sample;
        sample.features = features::condense_day(simulated);
        sample.label = cls;
        sample.day = day;
        sample.provenance = features::Provenance::Simulated;
        pack.counterfactuals.push_back(std::move(sample));
    }
    return pack;
}

TransformerPipeline::TransformerPipeline(const grid::NetworkTopology& topology,
                                         const std::vector<der::PvInverter>& pv_units,
                                         const loadest::LoadEstimator& estimator,
                                         MonitorConfig config)
    : topology_(topology), pv_units_(pv_units), estimator_(estimator), config_(std::move(config)) {
    if (config_.window_capacity < 2)
        throw Error(ErrKind::InvalidInput, "window capacity must be >= 2");
    if (config_.malfunction_classes.empty())
        throw Error(ErrKind::InvalidInput, "at least one malfunction class required");
}

std::vector<features::DailySample> TransformerPipeline::assemble_training_set() const {
    std::vector<features::DailySample> set;
    for (const auto& pack : window_) {
        set.push_back(pack.measured);
        for (auto sample : pack.counterfactuals) {
            if (config_.relabel_abnormal) sample.label = features::Label::Abnormal;
            set.push_back(std::move(sample));
        }
    }
    return set;
}

void TransformerPipeline::retrain() {
    const auto training = assemble_training_set();
    standardizer_ = features::fit_standardizer(training);
    std::vector<std::vector<double>> x;
    std::vector<features::Label> y;
    for (const auto& sample : training) {
        x.push_back(features::apply(standardizer_, sample.features));
        y.push_back(sample.label);
    }
    const svm::Kernel kernel =
        config_.kernel ? *config_.kernel : svm::default_kernel(x.front().size());
    svm_ = svm::train_multiclass(x, y, kernel, config_.smo);
}

void TransformerPipeline::calibrate(const sim::MeasurementSet& measurements) {
    if (measurements.days() < config_.window_capacity)
        throw Error(ErrKind::CalibrationIncomplete,
                    "calibration needs " + std::to_string(config_.window_capacity) + " days, got " +
                        std::to_string(measurements.days()));
    highres_step_s_ = measurements.highres_step_s;
    window_.clear();
    for (int day = 0; day < config_.window_capacity; ++day) {
        window_.push_back(build_day_pack(topology_, pv_units_, estimator_,
                                         measurements.substation[day], measurements.pv_known[day],
                                         day, measurements.highres_step_s,
                                         config_.malfunction_classes, config_.slack_voltage));
    }
    retrain();
    calibrated_ = true;
}

features::Label TransformerPipeline::classify_day(const Tensor& substation_day) const {
    if (!calibrated_)
        throw Error(ErrKind::CalibrationIncomplete, "pipeline not calibrated");
    const auto raw = features::condense_day(substation_day);
    const auto standardized = features::apply(standardizer_, raw);
    return svm::predict_multiclass(svm_, standardized);
}

size_t TransformerPipeline::training_set_size() const {
    size_t n = 0;
    for (const auto& pack : window_) n += 1 + pack.counterfactuals.size();
    return n;
}

std::map<std::string, int> TransformerPipeline::training_class_counts() const {
    std::map<std::string, int> counts;
    for (const auto& pack : window_) {
        counts[features::label_name(pack.measured.label)] += 1;
        for (const auto& sample : pack.counterfactuals) {
            const features::Label label =
                config_.relabel_abnormal ? features::Label::Abnormal : sample.label;
            counts[features::label_name(label)] += 1;
        }
    }
    return counts;
}

std::vector<int> TransformerPipeline::window_days() const {
    std::vector<int> days;
    for (const auto& pack : window_) days.push_back(pack.measured.day);
    return days;
}

DailyCycleReport TransformerPipeline::run_daily_cycle(const Tensor& substation_day,
                                                      const Tensor& pv_day, int day) {
    DailyCycleReport report;
    report.day = day;
    report.training_set_size = training_set_size();
    report.class_counts = training_class_counts();
    report.transformer_verdict = classify_day(substation_day);

    if (report.transformer_verdict == features::Label::Correct) {
        // regular day: enters the rolling window and the classifier follows
        if (static_cast<int>(window_.size()) >= config_.window_capacity) window_.pop_front();
        window_.push_back(build_day_pack(topology_, pv_units_, estimator_, substation_day, pv_day,
                                         day, highres_step_s_, config_.malfunction_classes,
                                         config_.slack_voltage));
        retrain();
    }
    report.window_size_after = window_.size();
    return report;
}

MonitorResult monitor_period(const sim::MeasurementSet& measurements,
                             const grid::NetworkTopology& topology,
                             const std::vector<der::PvInverter>& pv_units,
                             const loadest::LoadEstimator& estimator,
                             const DetectorDeployment& detectors, const MonitorConfig& config) {
    const std::string fingerprint = grid::topology_fingerprint(topology);
    if (estimator.topology_fingerprint != fingerprint)
        throw Error(ErrKind::FingerprintMismatch,
                    "estimator was trained for topology " + estimator.topology_fingerprint +
                        ", monitoring " + fingerprint);
    if (!measurements.grid_fingerprint.empty() && measurements.grid_fingerprint != fingerprint)
        throw Error(ErrKind::FingerprintMismatch,
                    "measurements come from topology " + measurements.grid_fingerprint +
                        ", monitoring " + fingerprint);
    if (measurements.days() < config.window_capacity + 1)
        throw Error(ErrKind::CalibrationIncomplete,
                    "need calibration days plus at least one monitoring day");

    std::vector<size_t> detector_columns;
    for (const auto& [bus, model] : detectors) {
        const auto it = std::find(measurements.meter_bus_ids.begin(),
                                  measurements.meter_bus_ids.end(), bus);
        if (it == measurements.meter_bus_ids.end())
            throw Error(ErrKind::SpecMismatch, "no meter series for detector bus " + std::to_string(bus));
        if (!model)
            throw Error(ErrKind::InvalidInput, "null detector model");
        detector_columns.push_back(
            static_cast<size_t>(it - measurements.meter_bus_ids.begin()));
    }

    TransformerPipeline pipeline(topology, pv_units, estimator, config);
    pipeline.calibrate(measurements);

    MonitorResult result;
    result.calibration_days = config.window_capacity;
    for (int day = config.window_capacity; day < measurements.days(); ++day) {
        auto report = pipeline.run_daily_cycle(measurements.substation[day],
                                               measurements.pv_known[day], day);

        std::vector<rt::DeviceFlag> flags;
        for (size_t di = 0; di < detectors.size(); ++di) {
            const auto& [bus, model] = detectors[di];
            const Tensor& meters = measurements.meters[day];
            rt::MeterWindow window;
            window.bus = bus;
            window.day = day;
            window.values.resize(meters.rows());
            for (size_t t = 0; t < meters.rows(); ++t)
                window.values[t] = meters(t, detector_columns[di]);
            if (auto flag = rt::detect(*model, window, config.detector_threshold))
                flags.push_back(*flag);
        }
        result.verdicts.push_back(fuse(report.transformer_verdict, flags));
        result.reports.push_back(std::move(report));
    }
    result.final_svm = pipeline.classifier();
    result.final_standardizer = pipeline.standardizer();
    return result;
}

void write_report_jsonl(const std::filesystem::path& path, const MonitorResult& result) {
    std::string out;
    for (size_t i = 0; i < result.reports.size(); ++i) {
        const auto& report = result.reports[i];
        const auto& verdict = result.verdicts[i];
        nlohmann::json flags = nlohmann::json::array();
        for (const auto& flag : verdict.flags) flags.push_back(rt::flag_to_json(flag));
        nlohmann::json fusion{{"kind", fusion_kind_name(verdict.kind)}};
        if (verdict.kind != FusionVerdict::Kind::ConsistentCorrect) {
            fusion["class"] = features::label_name(verdict.malfunction);
            if (verdict.bus >= 0) fusion["bus"] = verdict.bus;
            if (!verdict.details.empty()) fusion["details"] = verdict.details;
        }
        nlohmann::json line{{"day", report.day},
                            {"transformer_verdict", features::label_name(report.transformer_verdict)},
                            {"flags", flags},
                            {"fusion", fusion},
                            {"window_size", report.window_size_after},
                            {"training_counts", report.class_counts}};
        out += line.dump() + "\n";
    }
    io::write_text_file(path, out);
}

void write_summary_md(const std::filesystem::path& path, const MonitorResult& result) {
    std::string out = "# Monitoring summary\n\n";
    out += "Calibration days: " + std::to_string(result.calibration_days) + "\n\n";
    out += "| day | transformer verdict | fusion | bus | flags |\n";
    out += "|-----|---------------------|--------|-----|-------|\n";
    for (size_t i = 0; i < result.reports.size(); ++i) {
        const auto& report = result.reports[i];
        const auto& verdict = result.verdicts[i];
        out += "| " + std::to_string(report.day) + " | " +
               features::label_name(report.transformer_verdict) + " | " +
               fusion_kind_name(verdict.kind) + " | " +
               (verdict.bus >= 0 ? std::to_string(verdict.bus) : "-") + " | " +
               std::to_string(verdict.flags.size()) + " |\n";
    }
    io::write_text_file(path, out);
}

} // namespace demads::orch
