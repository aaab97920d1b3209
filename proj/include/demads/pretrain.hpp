#ifndef DEMADS_PRETRAIN_HPP
#define DEMADS_PRETRAIN_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "demads/rt_detector.hpp"

namespace demads::rt {

// One training grid: either an existing grid file or a generated layout.
struct PretrainGridSpec {
    std::optional<std::string> grid_file;
    int buses = 8;
    int feeders = 2;
    int pv_count = 1;
    std::uint64_t grid_seed = 1;
    std::uint64_t scenario_seed = 1;
};

struct PretrainManifest {
    features::Label use_case = features::Label::Inverted;
    std::vector<PretrainGridSpec> grids;
    int days_per_class = 20;
    RtConfig rt;
    nn::TrainConfig train{.optimizer = nn::OptimizerKind::Adam,
                          .lr = 1e-3,
                          .epochs = 60,
                          .batch_size = 16,
                          .loss = nn::LossKind::CrossEntropy,
                          .seed = 0};
};

PretrainManifest pretrain_manifest_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir);

// Simulates days_per_class correct days and days_per_class use-case
// malfunction days on one grid and cuts PV-bus meter windows from them.
// With randomize_conditions the days span blocks of varying tap position,
// irradiance and load level (training-time domain randomization); without
// it the grid runs at nominal conditions (evaluation sets).
std::vector<MeterWindow> build_pretrain_windows(const PretrainGridSpec& spec,
                                                features::Label use_case, int days_per_class,
                                                std::uint64_t seed,
                                                bool randomize_conditions = true);

// Full pre-training stage: windows from every manifest grid, one model.
RtModel run_pretraining(const PretrainManifest& manifest, std::uint64_t seed);

} // namespace demads::rt

#endif
