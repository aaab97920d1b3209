#include "demads/nn.hpp"

#include <algorithm>
#include <cmath>

#include "demads/error.hpp"
#include "demads/rng.hpp"

namespace demads::nn {

const char* activation_name(Activation a) {
    switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw Error(ErrKind::ParseError, "unknown activation '" + name + "'");
}

Mlp make_mlp(const std::vector<size_t>& dims, const std::vector<Activation>& activations,
             std::uint64_t seed) {
    if (dims.size() < 2 || activations.size() != dims.size() - 1)
        throw Error(ErrKind::ShapeMismatch, "mlp needs dims {in, ..., out} and one activation per layer");
    rng::Stream stream(seed);
    Mlp mlp;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.activation = activations[l];
        layer.weights = Tensor::zeros({dims[l + 1], dims[l]});
        layer.bias = Tensor::zeros({dims[l + 1]});
        const double bound = std::sqrt(1.0 / static_cast<double>(dims[l]));
        for (auto& w : layer.weights.data) w = stream.uniform(-bound, bound);
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

namespace {

void apply_activation(Activation act, Tensor& t) {
    switch (act) {
    case Activation::Identity:
        return;
    case Activation::Tanh:
        for (auto& v : t.data) v = std::tanh(v);
        return;
    case Activation::Relu:
        for (auto& v : t.data) v = v > 0.0 ? v : 0.0;
        return;
    }
}

// derivative expressed through the activation output
double activation_grad(Activation act, double y) {
    switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

Tensor as_batch(const Tensor& x) {
    if (x.shape.size() == 1) return Tensor({1, x.shape[0]}, x.data);
    return x;
}

// affine: out(n x out_dim) = x(n x in_dim) * W^T + b
Tensor affine(const Tensor& x, const DenseLayer& layer) {
    Tensor out = mat_mul_nt(x, layer.weights);
    for (size_t i = 0; i < out.rows(); ++i)
        for (size_t j = 0; j < out.cols(); ++j) out(i, j) += layer.bias[j];
    return out;
}

std::vector<Tensor> forward_cached(const Mlp& mlp, const Tensor& x) {
    std::vector<Tensor> outs;
    outs.reserve(mlp.layers.size() + 1);
    outs.push_back(as_batch(x));
    if (outs.front().cols() != mlp.input_dim())
        throw Error(ErrKind::ShapeMismatch, "input width != mlp input dim");
    for (const auto& layer : mlp.layers) {
        Tensor h = affine(outs.back(), layer);
        apply_activation(layer.activation, h);
        ensure_finite(h, "mlp forward");
        outs.push_back(std::move(h));
    }
    return outs;
}

void softmax_rows(Tensor& t) {
    for (size_t i = 0; i < t.rows(); ++i) {
        double* row = &t.data[i * t.cols()];
        const double mx = *std::max_element(row, row + t.cols());
        double sum = 0.0;
        for (size_t j = 0; j < t.cols(); ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (size_t j = 0; j < t.cols(); ++j) row[j] /= sum;
    }
}

// Returns the mean sample loss and fills dlogits (dL/d output).
double loss_and_grad(const Tensor& output, const Tensor& target, LossKind kind, Tensor* dout) {
    if (output.rows() != target.rows() || output.cols() != target.cols())
        throw Error(ErrKind::ShapeMismatch, "target shape != output shape");
    const double n = static_cast<double>(output.rows());
    const double d = static_cast<double>(output.cols());
    if (dout) *dout = Tensor::zeros({output.rows(), output.cols()});
    double loss = 0.0;
    if (kind == LossKind::Mse) {
        for (size_t i = 0; i < output.size(); ++i) {
            const double diff = output.data[i] - target.data[i];
            loss += diff * diff;
            if (dout) dout->data[i] = 2.0 * diff / (n * d);
        }
        return loss / (n * d);
    }
    // cross entropy over logits
    Tensor probs = output;
    softmax_rows(probs);
    for (size_t i = 0; i < output.rows(); ++i) {
        for (size_t j = 0; j < output.cols(); ++j) {
            const double t = target(i, j);
            if (t != 0.0) loss -= t * std::log(std::max(probs(i, j), 1e-300));
            if (dout) (*dout)(i, j) = (probs(i, j) - t) / n;
        }
    }
    return loss / n;
}

} // namespace

Tensor forward(const Mlp& mlp, const Tensor& x) {
    auto outs = forward_cached(mlp, x);
    Tensor result = std::move(outs.back());
    if (x.shape.size() == 1) result.shape = {result.size()};
    return result;
}

std::vector<double> forward_vec(const Mlp& mlp, std::span<const double> x) {
    Tensor in({1, x.size()}, std::vector<double>(x.begin(), x.end()));
    return forward(mlp, in).data;
}

double loss_value(const Mlp& mlp, const Tensor& x, const Tensor& target, LossKind loss) {
    const auto outs = forward_cached(mlp, x);
    return loss_and_grad(outs.back(), as_batch(target), loss, nullptr);
}

BackwardResult backward(const Mlp& mlp, const Tensor& x, const Tensor& target, LossKind loss) {
    const auto outs = forward_cached(mlp, x);
    BackwardResult result;
    Tensor delta;
    result.loss = loss_and_grad(outs.back(), as_batch(target), loss, &delta);

    result.grads.resize(mlp.layers.size());
    for (size_t li = mlp.layers.size(); li-- > 0;) {
        const auto& layer = mlp.layers[li];
        const Tensor& y = outs[li + 1];
        const Tensor& in = outs[li];
        // fold the activation derivative into delta
        for (size_t i = 0; i < delta.size(); ++i)
            delta.data[i] *= activation_grad(layer.activation, y.data[i]);
        LayerGrads g;
        g.weights = mat_mul_tn(delta, in); // out x in
        g.bias = Tensor::zeros({layer.out_dim()});
        for (size_t i = 0; i < delta.rows(); ++i)
            for (size_t j = 0; j < delta.cols(); ++j) g.bias[j] += delta(i, j);
        ensure_finite(g.weights, "mlp backward");
        result.grads[li] = std::move(g);
        if (li > 0) delta = mat_mul(delta, layer.weights); // n x in
    }
    return result;
}

Optimizer::Optimizer(const TrainConfig& config, const std::vector<size_t>& param_sizes)
    : config_(config) {
    if (config.lr <= 0.0)
        throw Error(ErrKind::InvalidInput, "learning rate must be positive");
    if (config.optimizer == OptimizerKind::Adam) {
        for (size_t n : param_sizes) {
            m_.emplace_back(n, 0.0);
            v_.emplace_back(n, 0.0);
        }
    } else {
        m_.resize(param_sizes.size());
        v_.resize(param_sizes.size());
    }
}

void Optimizer::step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads) {
    if (params.size() != m_.size() || grads.size() != params.size())
        throw Error(ErrKind::ShapeMismatch, "optimizer slot count mismatch");
    ++t_;
    for (size_t s = 0; s < params.size(); ++s) {
        auto p = params[s];
        auto g = grads[s];
        if (p.size() != g.size())
            throw Error(ErrKind::ShapeMismatch, "parameter/gradient size mismatch");
        if (config_.optimizer == OptimizerKind::Sgd) {
            for (size_t i = 0; i < p.size(); ++i) p[i] -= config_.lr * g[i];
            continue;
        }
        auto& m = m_[s];
        auto& v = v_[s];
        const double b1 = config_.beta1, b2 = config_.beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

std::vector<double> train(Mlp& mlp, const Tensor& inputs, const Tensor& targets,
                          const TrainConfig& config) {
    if (config.epochs < 1)
        throw Error(ErrKind::InvalidInput, "epochs must be >= 1");
    if (config.batch_size < 1)
        throw Error(ErrKind::InvalidInput, "batch_size must be >= 1");
    const size_t n = inputs.rows();
    if (n == 0 || targets.rows() != n)
        throw Error(ErrKind::ShapeMismatch, "dataset empty or inputs/targets row counts differ");

    std::vector<size_t> sizes;
    for (const auto& layer : mlp.layers) {
        sizes.push_back(layer.weights.size());
        sizes.push_back(layer.bias.size());
    }
    Optimizer opt(config, sizes);

    rng::Stream shuffle_stream(rng::derive(config.seed, {0x5f1eULL}));
    std::vector<size_t> order(n);
    std::vector<double> history;
    history.reserve(config.epochs);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (size_t i = 0; i < n; ++i) order[i] = i;
        for (size_t i = n; i > 1; --i) {
            const size_t j = shuffle_stream.below(i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        for (size_t start = 0; start < n; start += config.batch_size) {
            const size_t count = std::min<size_t>(config.batch_size, n - start);
            Tensor bx = Tensor::zeros({count, inputs.cols()});
            Tensor bt = Tensor::zeros({count, targets.cols()});
            for (size_t i = 0; i < count; ++i) {
                const size_t src = order[start + i];
                std::copy_n(&inputs.data[src * inputs.cols()], inputs.cols(),
                            &bx.data[i * inputs.cols()]);
                std::copy_n(&targets.data[src * targets.cols()], targets.cols(),
                            &bt.data[i * targets.cols()]);
            }
            auto back = backward(mlp, bx, bt, config.loss);
            epoch_loss += back.loss * static_cast<double>(count);

            std::vector<std::span<double>> params;
            std::vector<std::span<const double>> grads;
            for (size_t li = 0; li < mlp.layers.size(); ++li) {
                params.push_back(mlp.layers[li].weights.data);
                params.push_back(mlp.layers[li].bias.data);
                grads.push_back(back.grads[li].weights.data);
                grads.push_back(back.grads[li].bias.data);
            }
            opt.step(params, grads);
            for (const auto& layer : mlp.layers) ensure_finite(layer.weights, "training step");
        }
        history.push_back(epoch_loss / static_cast<double>(n));
    }
    return history;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty())
        throw Error(ErrKind::ShapeMismatch, "softmax of empty vector");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

nlohmann::json mlp_to_json(const Mlp& mlp) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : mlp.layers) {
        layers.push_back({{"in", layer.in_dim()},
                          {"out", layer.out_dim()},
                          {"activation", activation_name(layer.activation)},
                          {"weights", layer.weights.data},
                          {"bias", layer.bias.data}});
    }
    return {{"format_version", 1}, {"kind", "mlp"}, {"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
    Mlp mlp;
    try {
        if (j.at("format_version").get<int>() != 1)
            throw Error(ErrKind::ParseError, "unsupported mlp format_version");
        for (const auto& lj : j.at("layers")) {
            DenseLayer layer;
            const size_t in = lj.at("in").get<size_t>();
            const size_t out = lj.at("out").get<size_t>();
            layer.activation = activation_from_name(lj.at("activation").get<std::string>());
            layer.weights = Tensor({out, in}, lj.at("weights").get<std::vector<double>>());
            layer.bias = Tensor({out}, lj.at("bias").get<std::vector<double>>());
            if (layer.weights.size() != in * out || layer.bias.size() != out)
                throw Error(ErrKind::ParseError, "mlp layer array sizes inconsistent");
            mlp.layers.push_back(std::move(layer));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("mlp json: ") + e.what());
    }
    if (mlp.layers.empty())
        throw Error(ErrKind::ParseError, "mlp json has no layers");
    return mlp;
}

} // namespace demads::nn
