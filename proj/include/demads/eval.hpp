#ifndef DEMADS_EVAL_HPP
#define DEMADS_EVAL_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "demads/features.hpp"

namespace demads::eval {

struct ConfusionMatrix {
    std::vector<features::Label> labels;
    std::vector<size_t> counts; // k x k row-major, (truth, predicted)

    size_t at(size_t truth, size_t predicted) const {
        return counts[truth * labels.size() + predicted];
    }
    size_t total() const;
    size_t index_of(features::Label label) const;
};

// Entry (i, j) counts truth label i predicted as label j.
ConfusionMatrix confusion(const std::vector<features::Label>& predictions,
                          const std::vector<features::Label>& truths,
                          const std::vector<features::Label>& label_order);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
    bool degenerate = false; // some 0/0 ratio was reported as 0
    size_t support = 0;
};

ClassMetrics f_score(const ConfusionMatrix& matrix, features::Label cls);

struct MetricsReport {
    std::vector<std::pair<features::Label, ClassMetrics>> per_class;
    double macro_f = 0.0;
};

MetricsReport metrics_report(const ConfusionMatrix& matrix);

// The four result-table rows.
enum class BenchCase { CorrectVsWrong, CorrectVsInverted, ThreeClass, CorrectVsAbnormal };
const char* bench_case_name(BenchCase c);
BenchCase bench_case_from_name(const std::string& name);

struct BenchmarkSetup {
    std::string name;
    int buses = 8;
    int feeders = 2;
    int pv_count = 1;
    std::uint64_t grid_seed = 1;
    std::uint64_t scenario_seed = 1;
};

struct BenchmarkManifest {
    std::vector<BenchmarkSetup> setups;
    std::vector<BenchCase> cases{BenchCase::CorrectVsWrong, BenchCase::CorrectVsInverted,
                                 BenchCase::ThreeClass, BenchCase::CorrectVsAbnormal};
    int calibration_days = 14;
    int eval_days = 30;
    std::uint64_t seed = 7;
    size_t estimator_samples = 1200;
    int estimator_epochs = 150;
};

BenchmarkManifest manifest_from_json(const nlohmann::json& j);

struct BenchmarkCell {
    std::string setup;
    BenchCase bench_case;
    MetricsReport metrics;
    ConfusionMatrix matrix;
};

struct BenchmarkResult {
    std::vector<BenchmarkCell> cells;
    nlohmann::json seed_manifest;
};

// Per (setup, case): generates the grid, trains the load estimator,
// calibrates the transformer pipeline on malfunction-free days, then
// scores `eval_days` freshly simulated, class-balanced days (seeds and
// day indices disjoint from calibration). Writes results.csv, results.md
// and seed_manifest.json when out_dir is non-empty.
BenchmarkResult run_benchmark(const BenchmarkManifest& manifest,
                              const std::filesystem::path& out_dir);

void write_benchmark_outputs(const std::filesystem::path& out_dir, const BenchmarkResult& result);

// Metrics files for `evaluate`: the saved SVM applied to a dataset CSV.
MetricsReport evaluate_dataset(const std::filesystem::path& svm_model_path,
                               const std::filesystem::path& dataset_csv_path,
                               const std::filesystem::path& out_dir, const std::string& format);

} // namespace demads::eval

#endif
