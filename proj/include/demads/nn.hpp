#ifndef DEMADS_NN_HPP
#define DEMADS_NN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "demads/tensor.hpp"

namespace demads::nn {

enum class Activation { Identity, Tanh, Relu };
enum class LossKind { Mse, CrossEntropy };
enum class OptimizerKind { Sgd, Adam };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
    Tensor weights; // out x in
    Tensor bias;    // out
    Activation activation = Activation::Identity;

    size_t in_dim() const { return weights.cols(); }
    size_t out_dim() const { return weights.rows(); }
};

struct Mlp {
    std::vector<DenseLayer> layers;

    size_t input_dim() const { return layers.front().in_dim(); }
    size_t output_dim() const { return layers.back().out_dim(); }
};

// dims = {in, hidden..., out}; activations one per layer. Weights start
// uniform in +-sqrt(1/fan_in), biases at zero, drawn from `seed`.
Mlp make_mlp(const std::vector<size_t>& dims, const std::vector<Activation>& activations,
             std::uint64_t seed);

// x is a batch (n x in) or a single vector (in). Output keeps the batch
// shape. Throws ShapeMismatch / NonFiniteValue.
Tensor forward(const Mlp& mlp, const Tensor& x);
std::vector<double> forward_vec(const Mlp& mlp, std::span<const double> x);

struct LayerGrads {
    Tensor weights;
    Tensor bias;
};

struct BackwardResult {
    std::vector<LayerGrads> grads;
    double loss = 0.0;
};

// Reverse-mode gradients of the mean loss over the batch.
BackwardResult backward(const Mlp& mlp, const Tensor& x, const Tensor& target, LossKind loss);

// Forward-only loss; the finite-difference oracle in the tests drives this.
double loss_value(const Mlp& mlp, const Tensor& x, const Tensor& target, LossKind loss);

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int epochs = 100;
    int batch_size = 32;
    LossKind loss = LossKind::Mse;
    std::uint64_t seed = 0;
};

// Minibatch training with a seeded permutation per epoch. Returns the
// per-epoch mean sample loss (length = epochs).
std::vector<double> train(Mlp& mlp, const Tensor& inputs, const Tensor& targets,
                          const TrainConfig& config);

// SGD/Adam over an arbitrary parameter list; rt_detector reuses this.
class Optimizer {
public:
    Optimizer(const TrainConfig& config, const std::vector<size_t>& param_sizes);
    void step(const std::vector<std::span<double>>& params,
              const std::vector<std::span<const double>>& grads);

private:
    TrainConfig config_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

// Numerically safe softmax (max subtraction); components sum to 1.
std::vector<double> softmax(std::span<const double> logits);

nlohmann::json mlp_to_json(const Mlp& mlp);
Mlp mlp_from_json(const nlohmann::json& j);

} // namespace demads::nn

#endif
