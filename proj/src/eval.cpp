#include "demads/eval.hpp"

#include <algorithm>
#include <cmath>

#include "demads/error.hpp"
#include "demads/io.hpp"
#include "demads/load_estimation.hpp"
#include "demads/orchestrator.hpp"
#include "demads/rng.hpp"
#include "demads/scenario.hpp"
#include "demads/svm.hpp"
#include "demads/synth.hpp"

namespace demads::eval {

size_t ConfusionMatrix::total() const {
    size_t n = 0;
    for (size_t c : counts) n += c;
    return n;
}

size_t ConfusionMatrix::index_of(features::Label label) const {
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return i;
    throw Error(ErrKind::UnknownLabel,
                std::string("label not in matrix: ") + features::label_name(label));
}

ConfusionMatrix confusion(const std::vector<features::Label>& predictions,
                          const std::vector<features::Label>& truths,
                          const std::vector<features::Label>& label_order) {
    if (predictions.size() != truths.size())
        throw Error(ErrKind::LengthMismatch, "predictions/truths lengths differ");
    if (predictions.empty())
        throw Error(ErrKind::LengthMismatch, "cannot build a confusion matrix from zero samples");
    ConfusionMatrix matrix;
    matrix.labels = label_order;
    matrix.counts.assign(label_order.size() * label_order.size(), 0);
    for (size_t s = 0; s < truths.size(); ++s) {
        const size_t i = matrix.index_of(truths[s]);
        const size_t j = matrix.index_of(predictions[s]);
        matrix.counts[i * label_order.size() + j] += 1;
    }
    return matrix;
}

ClassMetrics f_score(const ConfusionMatrix& matrix, features::Label cls) {
    const size_t k = matrix.labels.size();
    const size_t c = matrix.index_of(cls);
    size_t tp = matrix.at(c, c), fp = 0, fn = 0;
    for (size_t i = 0; i < k; ++i) {
        if (i == c) continue;
        fp += matrix.at(i, c);
        fn += matrix.at(c, i);
    }
    ClassMetrics m;
    m.support = tp + fn;
    if (tp + fp == 0) {
        m.precision = 0.0;
        m.degenerate = true;
    } else {
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn == 0) {
        m.recall = 0.0;
        m.degenerate = true;
    } else {
        m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    if (m.precision + m.recall == 0.0) {
        m.f = 0.0;
        m.degenerate = true;
    } else {
        m.f = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

MetricsReport metrics_report(const ConfusionMatrix& matrix) {
    MetricsReport report;
    double sum = 0.0;
    for (features::Label label : matrix.labels) {
        const auto m = f_score(matrix, label);
        sum += m.f;
        report.per_class.emplace_back(label, m);
    }
    report.macro_f = sum / static_cast<double>(matrix.labels.size());
    return report;
}

const char* bench_case_name(BenchCase c) {
    switch (c) {
    case BenchCase::CorrectVsWrong: return "correct-vs-wrong";
    case BenchCase::CorrectVsInverted: return "correct-vs-inverted";
    case BenchCase::ThreeClass: return "correct-vs-wrong-vs-inverted";
    case BenchCase::CorrectVsAbnormal: return "correct-vs-abnormal";
    }
    return "correct-vs-wrong";
}

BenchCase bench_case_from_name(const std::string& name) {
    if (name == "correct-vs-wrong") return BenchCase::CorrectVsWrong;
    if (name == "correct-vs-inverted") return BenchCase::CorrectVsInverted;
    if (name == "correct-vs-wrong-vs-inverted") return BenchCase::ThreeClass;
    if (name == "correct-vs-abnormal") return BenchCase::CorrectVsAbnormal;
    throw Error(ErrKind::ParseError, "unknown benchmark case '" + name + "'");
}

BenchmarkManifest manifest_from_json(const nlohmann::json& j) {
    BenchmarkManifest manifest;
    try {
        manifest.setups.clear();
        for (const auto& sj : j.at("setups")) {
            BenchmarkSetup setup;
            setup.name = sj.at("name").get<std::string>();
            setup.buses = sj.value("buses", 8);
            setup.feeders = sj.value("feeders", 2);
            setup.pv_count = sj.value("pv_count", 1);
            setup.grid_seed = sj.value("grid_seed", 1ULL);
            setup.scenario_seed = sj.value("scenario_seed", 1ULL);
            manifest.setups.push_back(std::move(setup));
        }
        if (j.contains("cases")) {
            manifest.cases.clear();
            for (const auto& cj : j.at("cases"))
                manifest.cases.push_back(bench_case_from_name(cj.get<std::string>()));
        }
        manifest.calibration_days = j.value("calibration_days", 14);
        manifest.eval_days = j.value("eval_days", 30);
        manifest.seed = j.value("seed", 7ULL);
        manifest.estimator_samples = j.value("estimator_samples", 1200ULL);
        manifest.estimator_epochs = j.value("estimator_epochs", 150);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("benchmark manifest: ") + e.what());
    }
    return manifest;
}

namespace {

struct CaseSpec {
    std::vector<features::Label> malfunctions; // underlying simulated classes
    bool relabel_abnormal = false;
    std::vector<features::Label> label_order;  // classifier label set
};

CaseSpec case_spec(BenchCase c) {
    using features::Label;
    switch (c) {
    case BenchCase::CorrectVsWrong:
        return {{Label::Wrong}, false, {Label::Correct, Label::Wrong}};
    case BenchCase::CorrectVsInverted:
        return {{Label::Inverted}, false, {Label::Correct, Label::Inverted}};
    case BenchCase::ThreeClass:
        return {{Label::Wrong, Label::Inverted}, false, {Label::Correct, Label::Wrong, Label::Inverted}};
    case BenchCase::CorrectVsAbnormal:
        return {{Label::Wrong, Label::Inverted}, true, {Label::Correct, Label::Abnormal}};
    }
    throw Error(ErrKind::InvalidInput, "unhandled benchmark case");
}

der::ControlCurveVariant variant_of(features::Label label) {
    switch (label) {
    case features::Label::Wrong: return der::ControlCurveVariant::Wrong;
    case features::Label::Inverted: return der::ControlCurveVariant::Inverted;
    default: return der::ControlCurveVariant::Correct;
    }
}

} // namespace

BenchmarkResult run_benchmark(const BenchmarkManifest& manifest,
                              const std::filesystem::path& out_dir) {
    if (manifest.eval_days < 1)
        throw Error(ErrKind::InvalidInput, "benchmark needs at least one evaluation day");
    if (manifest.setups.empty() || manifest.cases.empty())
        throw Error(ErrKind::InvalidInput, "benchmark needs setups and cases");
    if (manifest.calibration_days < 2)
        throw Error(ErrKind::InvalidInput, "calibration needs at least two days");

    BenchmarkResult result;
    result.seed_manifest["seed"] = manifest.seed;
    result.seed_manifest["setups"] = nlohmann::json::array();

    for (size_t si = 0; si < manifest.setups.size(); ++si) {
        const auto& setup = manifest.setups[si];
        io::log::info("benchmark setup " + setup.name);
        const auto topology =
            synth::generate_topology(setup.buses, setup.feeders, setup.grid_seed);
        const auto pv_units = synth::assign_pv_units(topology, setup.pv_count, setup.grid_seed);

        const std::uint64_t estimator_seed = rng::derive(manifest.seed, {si, 0xe57ULL});
        const auto training_set = loadest::build_training_set(topology, pv_units,
                                                              manifest.estimator_samples, 0.0,
                                                              8.0, estimator_seed);
        loadest::EstimatorTrainOptions options;
        options.train.epochs = manifest.estimator_epochs;
        options.train.seed = rng::derive(manifest.seed, {si, 0xe58ULL});
        const auto estimator = loadest::train_estimator(training_set, options);

        const std::uint64_t calibration_seed = rng::derive(setup.scenario_seed, {0xca1ULL});
        auto cal_config = synth::default_scenario(topology, pv_units, manifest.calibration_days,
                                                  setup.scenario_seed, calibration_seed);
        const auto calibration = sim::run_scenario(cal_config);

        // counterfactual packs once per setup, shared by all cases
        const std::vector<features::Label> all_malfunctions{features::Label::Wrong,
                                                            features::Label::Inverted};
        std::vector<orch::DayPack> packs;
        for (int day = 0; day < manifest.calibration_days; ++day)
            packs.push_back(orch::build_day_pack(topology, pv_units, estimator,
                                                 calibration.substation[day],
                                                 calibration.pv_known[day], day,
                                                 calibration.highres_step_s, all_malfunctions,
                                                 1.0));

        nlohmann::json setup_seeds{{"name", setup.name},
                                   {"grid_seed", setup.grid_seed},
                                   {"scenario_seed", setup.scenario_seed},
                                   {"estimator_seed", estimator_seed},
                                   {"calibration_seed", calibration_seed},
                                   {"cases", nlohmann::json::array()}};

        for (size_t ci = 0; ci < manifest.cases.size(); ++ci) {
            const BenchCase bench_case = manifest.cases[ci];
            const CaseSpec spec = case_spec(bench_case);

            // assemble the calibration training set for this case
            std::vector<features::DailySample> training;
            for (const auto& pack : packs) {
                training.push_back(pack.measured);
                for (const auto& counterfactual : pack.counterfactuals) {
                    if (std::find(spec.malfunctions.begin(), spec.malfunctions.end(),
                                  counterfactual.label) == spec.malfunctions.end())
                        continue;
                    auto sample = counterfactual;
                    if (spec.relabel_abnormal) sample.label = features::Label::Abnormal;
                    training.push_back(std::move(sample));
                }
            }
            const auto standardizer = features::fit_standardizer(training);
            std::vector<std::vector<double>> x;
            std::vector<features::Label> y;
            for (const auto& sample : training) {
                x.push_back(features::apply(standardizer, sample.features));
                y.push_back(sample.label);
            }
            svm::SmoConfig smo;
            smo.seed = rng::derive(manifest.seed, {si, ci, 0x50fULL});
            const auto model = svm::train_multiclass(x, y, svm::default_kernel(x.front().size()), smo);

            // evaluation days: class-balanced, fresh seeds, day indices past calibration
            std::vector<features::Label> truths, predictions;
            std::vector<features::DailySample> eval_samples;
            nlohmann::json eval_seeds = nlohmann::json::array();
            const size_t n_classes = spec.label_order.size();
            size_t malfunction_counter = 0;
            for (int k = 0; k < manifest.eval_days; ++k) {
                const int day_index = manifest.calibration_days + k;
                if (day_index < manifest.calibration_days)
                    throw Error(ErrKind::InvalidInput, "evaluation day overlaps calibration");
                features::Label truth = features::Label::Correct;
                der::ControlCurveVariant variant = der::ControlCurveVariant::Correct;
                if (k % n_classes != 0) {
                    const features::Label underlying =
                        spec.relabel_abnormal
                            ? spec.malfunctions[malfunction_counter % spec.malfunctions.size()]
                            : spec.malfunctions[(k % n_classes) - 1];
                    variant = variant_of(underlying);
                    truth = spec.relabel_abnormal ? features::Label::Abnormal : underlying;
                    ++malfunction_counter;
                }

                const std::uint64_t run_seed =
                    rng::derive(setup.scenario_seed, {0xe7a1ULL, ci, static_cast<std::uint64_t>(k)});
                auto config = synth::default_scenario(topology, pv_units, 1, setup.scenario_seed,
                                                      run_seed);
                for (auto& unit : config.pv_units) unit.variant = variant;
                const auto day = sim::run_scenario(config);
                const auto raw = features::condense_day(day.substation[0]);
                const auto standardized = features::apply(standardizer, raw);
                predictions.push_back(svm::predict_multiclass(model, standardized));
                truths.push_back(truth);
                eval_seeds.push_back(run_seed);

                features::DailySample sample;
                sample.features = raw;
                sample.label = truth;
                sample.day = day_index;
                sample.provenance = features::Provenance::Simulated;
                eval_samples.push_back(std::move(sample));
            }

            BenchmarkCell cell;
            cell.setup = setup.name;
            cell.bench_case = bench_case;
            cell.matrix = confusion(predictions, truths, spec.label_order);
            cell.metrics = metrics_report(cell.matrix);
            result.cells.push_back(std::move(cell));

            setup_seeds["cases"].push_back({{"case", bench_case_name(bench_case)},
                                            {"smo_seed", smo.seed},
                                            {"eval_run_seeds", eval_seeds}});

            // saved artifacts so `evaluate` can re-score the cell offline
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                const std::string stem = setup.name + "_" + bench_case_name(bench_case);
                io::write_json_file(out_dir / ("svm_" + stem + ".json"),
                                    svm::multiclass_to_json(model, &standardizer));
                features::write_dataset_csv(out_dir / ("eval_" + stem + ".csv"), eval_samples,
                                            calibration.channel_names);
            }
        }
        result.seed_manifest["setups"].push_back(std::move(setup_seeds));
    }

    if (!out_dir.empty()) write_benchmark_outputs(out_dir, result);
    return result;
}

void write_benchmark_outputs(const std::filesystem::path& out_dir, const BenchmarkResult& result) {
    std::filesystem::create_directories(out_dir);

    // results.csv: one row per (setup, case, class) plus the macro-F
    std::string csv = "setup,case,class,precision,recall,f,support,macro_f\n";
    for (const auto& cell : result.cells) {
        for (const auto& [label, metrics] : cell.metrics.per_class) {
            csv += cell.setup;
            csv += ',';
            csv += bench_case_name(cell.bench_case);
            csv += ',';
            csv += features::label_name(label);
            csv += ',';
            csv += io::format_double(metrics.precision);
            csv += ',';
            csv += io::format_double(metrics.recall);
            csv += ',';
            csv += io::format_double(metrics.f);
            csv += ',';
            csv += std::to_string(metrics.support);
            csv += ',';
            csv += io::format_double(cell.metrics.macro_f);
            csv += '\n';
        }
    }
    io::write_text_file(out_dir / "results.csv", csv);

    // results.md: cases as rows, setups as columns (macro-F)
    std::vector<std::string> setups;
    std::vector<BenchCase> cases;
    for (const auto& cell : result.cells) {
        if (std::find(setups.begin(), setups.end(), cell.setup) == setups.end())
            setups.push_back(cell.setup);
        if (std::find(cases.begin(), cases.end(), cell.bench_case) == cases.end())
            cases.push_back(cell.bench_case);
    }
    std::string md = "# Detection results (macro F-score, simulated data)\n\n| case |";
    for (const auto& s : setups) md += " " + s + " |";
    md += "\n|------|";
    for (size_t i = 0; i < setups.size(); ++i) md += "------|";
    md += "\n";
    for (BenchCase c : cases) {
        md += "| ";
        md += bench_case_name(c);
        md += " |";
        for (const auto& s : setups) {
            const auto it = std::find_if(result.cells.begin(), result.cells.end(),
                                         [&](const BenchmarkCell& cell) {
                                             return cell.setup == s && cell.bench_case == c;
                                         });
            md += it == result.cells.end()
                      ? " - |"
                      : " " + io::format_double(it->metrics.macro_f) + " |";
        }
        md += "\n";
    }
    io::write_text_file(out_dir / "results.md", md);
    io::write_json_file(out_dir / "seed_manifest.json", result.seed_manifest);
}

MetricsReport evaluate_dataset(const std::filesystem::path& svm_model_path,
                               const std::filesystem::path& dataset_csv_path,
                               const std::filesystem::path& out_dir, const std::string& format) {
    std::optional<features::Standardizer> standardizer;
    const auto model = svm::multiclass_from_json(io::read_json_file(svm_model_path), &standardizer);
    const auto samples = features::read_dataset_csv(dataset_csv_path);

    std::vector<features::Label> predictions, truths;
    for (const auto& sample : samples) {
        const auto row = standardizer ? features::apply(*standardizer, sample.features)
                                      : sample.features;
        predictions.push_back(svm::predict_multiclass(model, row));
        truths.push_back(sample.label);
    }
    const auto matrix = confusion(predictions, truths, model.labels);
    const auto report = metrics_report(matrix);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        if (format == "json") {
            nlohmann::json j{{"macro_f", report.macro_f}, {"classes", nlohmann::json::array()}};
            for (const auto& [label, metrics] : report.per_class)
                j["classes"].push_back({{"label", features::label_name(label)},
                                        {"precision", metrics.precision},
                                        {"recall", metrics.recall},
                                        {"f", metrics.f},
                                        {"support", metrics.support},
                                        {"degenerate", metrics.degenerate}});
            io::write_json_file(out_dir / "metrics.json", j);
        } else if (format == "md") {
            std::string md = "# Evaluation metrics\n\n| class | precision | recall | f | support |\n"
                             "|-------|-----------|--------|---|---------|\n";
            for (const auto& [label, metrics] : report.per_class)
                md += std::string("| ") + features::label_name(label) + " | " +
                      io::format_double(metrics.precision) + " | " +
                      io::format_double(metrics.recall) + " | " + io::format_double(metrics.f) +
                      " | " + std::to_string(metrics.support) + " |\n";
            md += "\nmacro F: " + io::format_double(report.macro_f) + "\n";
            io::write_text_file(out_dir / "metrics.md", md);
        } else {
            std::string csv = "class,precision,recall,f,support,macro_f\n";
            for (const auto& [label, metrics] : report.per_class)
                csv += std::string(features::label_name(label)) + "," +
                       io::format_double(metrics.precision) + "," +
                       io::format_double(metrics.recall) + "," + io::format_double(metrics.f) +
                       "," + std::to_string(metrics.support) + "," +
                       io::format_double(report.macro_f) + "\n";
            io::write_text_file(out_dir / "metrics.csv", csv);
        }
    }
    return report;
}

} // namespace demads::eval
