#ifndef DEMADS_RT_DETECTOR_HPP
#define DEMADS_RT_DETECTOR_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "demads/features.hpp"
#include "demads/nn.hpp"
#include "demads/tensor.hpp"

namespace demads::rt {

struct RtConfig {
    int window_w = 8;   // local RNN window length
    int model_dim = 16; // d, divisible by heads
    int heads = 2;
    int blocks = 1;
    int classes = 2;  // index 0 = correct operation, 1 = the use-case malfunction
    int seq_len = 96; // one day at 15 min

    void validate() const;
};

// One R-Transformer block: windowed local RNN for short-range order,
// global multi-head attention (keys/queries/energy scores) for long-range
// structure, position-wise feedforward.
struct BlockParams {
    Tensor rnn_wx, rnn_wh; // d x d
    Tensor rnn_b;          // d
    Tensor wq, wk, wv, wo; // d x d
    Tensor ff1_w;          // 4d x d
    Tensor ff1_b;          // 4d
    Tensor ff2_w;          // d x 4d
    Tensor ff2_b;          // d
};

struct RtModel {
    RtConfig config;
    Tensor embed_w; // d x 1
    Tensor embed_b; // d
    std::vector<BlockParams> blocks;
    Tensor head_w; // k x d
    Tensor head_b; // k
    // training-set voltage statistics, applied to every input window
    double input_mean = 0.0;
    double input_std = 1.0;
    features::Label use_case = features::Label::Inverted;
};

RtModel make_model(const RtConfig& config, std::uint64_t seed,
                   features::Label use_case = features::Label::Inverted);

struct MeterWindow {
    std::vector<double> values; // voltage magnitudes (pu), length = seq_len
    int bus = 0;
    int day = 0;
    int label = 0; // 0 correct, 1 malfunction
    std::string grid_fingerprint;
};

// Minimal detection record; deliberately carries no raw measurement data.
struct DeviceFlag {
    int bus = 0;
    features::Label use_case = features::Label::Inverted;
    double probability = 0.0;
    int day = 0;
};

nlohmann::json flag_to_json(const DeviceFlag& flag);
DeviceFlag flag_from_json(const nlohmann::json& j);

// Position t's output is the final hidden state of a Tanh RNN run over
// positions (t-w+1 .. t), zero-initialized with zero left padding.
Tensor local_rnn_forward(const BlockParams& block, const Tensor& input, int window_w);

// Global (unmasked) scaled-dot-product attention; energy = row softmax of
// Q K^T / sqrt(d/heads) per head.
Tensor attention_forward(const BlockParams& block, const Tensor& states, int heads);

// Class probabilities for one raw meter window (standardization included).
std::vector<double> classify(const RtModel& model, std::span<const double> window);

// Cross-entropy of one window against its target class, forward-only.
// The finite-difference gradient oracle in the tests drives this.
double loss_only(const RtModel& model, std::span<const double> window, int target_class);

struct RtGrads {
    Tensor embed_w, embed_b;
    std::vector<BlockParams> blocks;
    Tensor head_w, head_b;
};

RtGrads zero_grads(const RtModel& model);
// Accumulates gradients of the (unaveraged) window loss into `grads`.
double backward(const RtModel& model, std::span<const double> window, int target_class,
                RtGrads& grads);

std::vector<std::span<double>> param_views(RtModel& model);
std::vector<std::span<double>> grad_views(RtGrads& grads);

// Pre-trains across simulated grids. Requires both labels and multiple
// distinct grid fingerprints (the deployed framework uses >= 3). Stores
// the training-set voltage mean/std in the model. Returns per-epoch mean
// loss history.
std::vector<double> pretrain(RtModel& model, const std::vector<MeterWindow>& dataset,
                             const nn::TrainConfig& config);

// Raises a flag when the malfunction probability reaches the threshold
// (closed boundary: p >= threshold flags).
std::optional<DeviceFlag> detect(const RtModel& model, const MeterWindow& window,
                                 double threshold = 0.5);

nlohmann::json model_to_json(const RtModel& model);
RtModel model_from_json(const nlohmann::json& j);

} // namespace demads::rt

#endif
