#ifndef DEMADS_FEATURES_HPP
#define DEMADS_FEATURES_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "demads/tensor.hpp"

namespace demads::features {

enum class Label { Correct, Wrong, Inverted, Abnormal };
enum class Provenance { Measured, Simulated };

const char* label_name(Label label);
Label label_from_name(const std::string& name);
const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

struct DailySample {
    std::vector<double> features;
    Label label = Label::Correct;
    int day = 0;
    Provenance provenance = Provenance::Measured;
};

inline constexpr size_t kFeaturesPerChannel = 31; // 7 summary stats + 24 hourly means

// Condenses one day (timesteps x channels) into a fixed feature vector:
// per channel, in order: mean, population std, min, max, 25/50/75
// percentiles (linear interpolation), then 24 hourly means (hour bucket
// of timestep i is floor(i * 24 / timesteps)).
std::vector<double> condense_day(const Tensor& day_matrix);

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std_dev; // zero-variance features guarded to 1
};

// Population statistics over >= 2 rows; throws TooFewSamples otherwise.
Standardizer fit_standardizer(const std::vector<std::vector<double>>& rows);
Standardizer fit_standardizer(const std::vector<DailySample>& samples);

std::vector<double> apply(const Standardizer& s, std::span<const double> x);
std::vector<double> invert(const Standardizer& s, std::span<const double> x);

nlohmann::json standardizer_to_json(const Standardizer& s);
Standardizer standardizer_from_json(const nlohmann::json& j);

// Dataset CSV: day, provenance, label, then features in documented order.
// The sidecar JSON stores channel names and the pipeline config.
void write_dataset_csv(const std::filesystem::path& path, const std::vector<DailySample>& samples,
                       const std::vector<std::string>& channel_names);
std::vector<DailySample> read_dataset_csv(const std::filesystem::path& path);

} // namespace demads::features

#endif
