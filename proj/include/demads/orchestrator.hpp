#ifndef DEMADS_ORCHESTRATOR_HPP
#define DEMADS_ORCHESTRATOR_HPP

#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "demads/features.hpp"
#include "demads/load_estimation.hpp"
#include "demads/rt_detector.hpp"
#include "demads/scenario.hpp"
#include "demads/svm.hpp"

namespace demads::orch {

struct DailyCycleReport {
    int day = 0;
    features::Label transformer_verdict = features::Label::Correct;
    size_t training_set_size = 0;              // of the classifier that judged the day
    std::map<std::string, int> class_counts;   // label name -> training count
    size_t window_size_after = 0;
};

struct FusionVerdict {
    enum class Kind { ConsistentCorrect, ConfirmedLocalized, TransformerOnly, DeviceOnly, Contradiction };
    Kind kind = Kind::ConsistentCorrect;
    int bus = -1;                                          // localized kinds
    features::Label malfunction = features::Label::Correct; // the detected class
    std::vector<rt::DeviceFlag> flags;                      // every flag of the day
    std::string details;
};

const char* fusion_kind_name(FusionVerdict::Kind kind);

// Pure fusion rule table. The transformer verdict and all device flags of
// one day combine into a single localization statement; with multiple
// flags the highest-probability one decides (ties: lowest bus id), the
// rest are listed in `details`.
FusionVerdict fuse(features::Label transformer_verdict, const std::vector<rt::DeviceFlag>& flags);

struct MonitorConfig {
    int window_capacity = 14;
    std::vector<features::Label> malfunction_classes{features::Label::Wrong,
                                                     features::Label::Inverted};
    bool relabel_abnormal = false; // group all malfunction classes as Abnormal
    svm::SmoConfig smo;
    std::optional<svm::Kernel> kernel; // default: rbf, gamma = 1/feature_count
    double detector_threshold = 0.5;
    double slack_voltage = 1.0;
};

// One measured day plus its simulated malfunction counterparts.
struct DayPack {
    features::DailySample measured;
    std::vector<features::DailySample> counterfactuals;
};

// Per-timestep (load P, load Q) series for one day. ANN estimates are
// reconciled per feeder with the measured head active power (known PV
// added back) so that re-simulating them reproduces the measured record;
// without this the estimator residual inflates every simulated day's
// variance features and the classifier keys on provenance instead of
// inverter behavior. Q follows from the fixed load power factor.
std::pair<Tensor, Tensor> estimate_day_loads(const grid::NetworkTopology& topology,
                                             const std::vector<der::PvInverter>& pv_units,
                                             const loadest::LoadEstimator& estimator,
                                             const Tensor& substation_day, const Tensor& pv_day,
                                             int highres_step_s);

// Estimates per-timestep loads from the substation channels (+ time of
// day + known PV), re-simulates the day under each malfunction class and
// condenses everything. The central path: consumes substation and known
// PV data only, never meter series.
DayPack build_day_pack(const grid::NetworkTopology& topology,
                       const std::vector<der::PvInverter>& pv_units,
                       const loadest::LoadEstimator& estimator, const Tensor& substation_day,
                       const Tensor& pv_day, int day, int highres_step_s,
                       const std::vector<features::Label>& malfunction_classes,
                       double slack_voltage);

// Transformer-level state: rolling window of measured-Correct days, their
// counterfactuals, and the SVM retrained on every window change.
class TransformerPipeline {
public:
    TransformerPipeline(const grid::NetworkTopology& topology,
                        const std::vector<der::PvInverter>& pv_units,
                        const loadest::LoadEstimator& estimator, MonitorConfig config);

    // Consumes the first window_capacity days, all assumed Correct.
    // Throws CalibrationIncomplete when fewer days are supplied.
    void calibrate(const sim::MeasurementSet& measurements);

    bool calibrated() const { return calibrated_; }

    // The once-a-day central cycle for one new measured day.
    DailyCycleReport run_daily_cycle(const Tensor& substation_day, const Tensor& pv_day, int day);

    features::Label classify_day(const Tensor& substation_day) const;

    const svm::MultiClassSvm& classifier() const { return svm_; }
    const features::Standardizer& standardizer() const { return standardizer_; }
    size_t window_size() const { return window_.size(); }
    std::vector<int> window_days() const;
    size_t training_set_size() const;
    std::map<std::string, int> training_class_counts() const;

private:
    void retrain();
    std::vector<features::DailySample> assemble_training_set() const;

    const grid::NetworkTopology& topology_;
    std::vector<der::PvInverter> pv_units_;
    const loadest::LoadEstimator& estimator_;
    MonitorConfig config_;
    int highres_step_s_ = 60; // taken from the calibration measurements
    std::deque<DayPack> window_;
    features::Standardizer standardizer_;
    svm::MultiClassSvm svm_;
    bool calibrated_ = false;
};

struct MonitorResult {
    std::vector<DailyCycleReport> reports;
    std::vector<FusionVerdict> verdicts;
    int calibration_days = 0;
    svm::MultiClassSvm final_svm; // classifier state after the last cycle
    features::Standardizer final_standardizer;
};

// Deployed device detectors: (bus, model). Each detector consumes only
// its own bus's meter series.
using DetectorDeployment = std::vector<std::pair<int, const rt::RtModel*>>;

MonitorResult monitor_period(const sim::MeasurementSet& measurements,
                             const grid::NetworkTopology& topology,
                             const std::vector<der::PvInverter>& pv_units,
                             const loadest::LoadEstimator& estimator,
                             const DetectorDeployment& detectors, const MonitorConfig& config);

void write_report_jsonl(const std::filesystem::path& path, const MonitorResult& result);
void write_summary_md(const std::filesystem::path& path, const MonitorResult& result);

} // namespace demads::orch

#endif
