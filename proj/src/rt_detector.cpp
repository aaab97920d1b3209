#include "demads/rt_detector.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "demads/error.hpp"
#include "demads/rng.hpp"

namespace demads::rt {

void RtConfig::validate() const {
    if (model_dim < 1 || heads < 1 || model_dim % heads != 0)
        throw Error(ErrKind::ShapeMismatch, "model_dim must be a positive multiple of heads");
    if (window_w < 1 || window_w > seq_len)
        throw Error(ErrKind::ShapeMismatch, "window_w must be in [1, seq_len]");
    if (blocks < 1 || classes < 2 || seq_len < 1)
        throw Error(ErrKind::ShapeMismatch, "blocks >= 1, classes >= 2, seq_len >= 1 required");
}

namespace {

Tensor init_matrix(size_t rows, size_t cols, rng::Stream& stream) {
    Tensor t = Tensor::zeros({rows, cols});
    const double bound = std::sqrt(1.0 / static_cast<double>(cols));
    for (auto& v : t.data) v = stream.uniform(-bound, bound);
    return t;
}

} // namespace

RtModel make_model(const RtConfig& config, std::uint64_t seed, features::Label use_case) {
    config.validate();
    const auto d = static_cast<size_t>(config.model_dim);
    rng::Stream stream(seed);
    RtModel model;
    model.config = config;
    model.use_case = use_case;
    model.embed_w = init_matrix(d, 1, stream);
    model.embed_b = Tensor::zeros({d});
    for (int b = 0; b < config.blocks; ++b) {
        BlockParams block;
        block.rnn_wx = init_matrix(d, d, stream);
        block.rnn_wh = init_matrix(d, d, stream);
        block.rnn_b = Tensor::zeros({d});
        block.wq = init_matrix(d, d, stream);
        block.wk = init_matrix(d, d, stream);
        block.wv = init_matrix(d, d, stream);
        block.wo = init_matrix(d, d, stream);
        block.ff1_w = init_matrix(4 * d, d, stream);
        block.ff1_b = Tensor::zeros({4 * d});
        block.ff2_w = init_matrix(d, 4 * d, stream);
        block.ff2_b = Tensor::zeros({d});
        model.blocks.push_back(std::move(block));
    }
    model.head_w = init_matrix(static_cast<size_t>(config.classes), d, stream);
    model.head_b = Tensor::zeros({static_cast<size_t>(config.classes)});
    return model;
}

nlohmann::json flag_to_json(const DeviceFlag& flag) {
    return {{"day", flag.day},
            {"bus", flag.bus},
            {"use_case", features::label_name(flag.use_case)},
            {"probability", flag.probability}};
}

DeviceFlag flag_from_json(const nlohmann::json& j) {
    DeviceFlag flag;
    try {
        flag.day = j.at("day").get<int>();
        flag.bus = j.at("bus").get<int>();
        flag.use_case = features::label_from_name(j.at("use_case").get<std::string>());
        flag.probability = j.at("probability").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("flag json: ") + e.what());
    }
    return flag;
}

namespace {

struct BlockCache {
    Tensor input;               // L x d
    Tensor rnn_hidden;          // L x (w*d): hidden after each window step
    Tensor rnn_out;             // L x d
    Tensor q, k, v;             // L x d
    std::vector<Tensor> energy; // per head, L x L
    Tensor att_concat;          // L x d (pre output projection)
    Tensor att_out;             // L x d
    Tensor ff_hidden;           // L x 4d (post relu)
    Tensor out;                 // L x d
};

struct ForwardCache {
    std::vector<double> x_std;
    Tensor embedded;
    std::vector<BlockCache> blocks;
    std::vector<double> pooled;
    std::vector<double> logits;
    std::vector<double> probs;
};

void rnn_forward_cached(const BlockParams& block, const Tensor& input, int window_w,
                        BlockCache& cache) {
    const size_t L = input.rows();
    const size_t d = input.cols();
    cache.rnn_hidden = Tensor::zeros({L, static_cast<size_t>(window_w) * d});
    cache.rnn_out = Tensor::zeros({L, d});
    std::vector<double> h(d), u(d);
    for (size_t t = 0; t < L; ++t) {
        std::fill(h.begin(), h.end(), 0.0);
        for (int j = 0; j < window_w; ++j) {
            const long s = static_cast<long>(t) - window_w + 1 + j;
            for (size_t i = 0; i < d; ++i) {
                double acc = block.rnn_b[i];
                const double* wh = &block.rnn_wh.data[i * d];
                for (size_t m = 0; m < d; ++m) acc += wh[m] * h[m];
                if (s >= 0) {
                    const double* wx = &block.rnn_wx.data[i * d];
                    const double* xs = &input.data[static_cast<size_t>(s) * d];
                    for (size_t m = 0; m < d; ++m) acc += wx[m] * xs[m];
                }
                u[i] = std::tanh(acc);
            }
            h = u;
            std::copy(h.begin(), h.end(), &cache.rnn_hidden.data[(t * window_w + j) * d]);
        }
        std::copy(h.begin(), h.end(), &cache.rnn_out.data[t * d]);
    }
}

void softmax_rows_inplace(Tensor& t) {
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

void attention_forward_cached(const BlockParams& block, const Tensor& states, int heads,
                              BlockCache& cache) {
    const size_t L = states.rows();
    const size_t d = states.cols();
    const size_t dh = d / static_cast<size_t>(heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    cache.q = mat_mul_nt(states, block.wq);
    cache.k = mat_mul_nt(states, block.wk);
    cache.v = mat_mul_nt(states, block.wv);
    cache.energy.clear();
    cache.att_concat = Tensor::zeros({L, d});
    for (int m = 0; m < heads; ++m) {
        const size_t off = static_cast<size_t>(m) * dh;
        Tensor scores = Tensor::zeros({L, L});
        for (size_t i = 0; i < L; ++i)
            for (size_t j = 0; j < L; ++j) {
                double acc = 0.0;
                for (size_t c = 0; c < dh; ++c) acc += cache.q(i, off + c) * cache.k(j, off + c);
                scores(i, j) = acc * scale;
            }
        softmax_rows_inplace(scores); // the energy score matrix
        for (size_t i = 0; i < L; ++i)
            for (size_t c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (size_t j = 0; j < L; ++j) acc += scores(i, j) * cache.v(j, off + c);
                cache.att_concat(i, off + c) = acc;
            }
        cache.energy.push_back(std::move(scores));
    }
    cache.att_out = mat_mul_nt(cache.att_concat, block.wo);
}

void block_forward_cached(const BlockParams& block, const Tensor& input, const RtConfig& config,
                          BlockCache& cache) {
    cache.input = input;
    rnn_forward_cached(block, input, config.window_w, cache);
    attention_forward_cached(block, cache.rnn_out, config.heads, cache);
    // position-wise feedforward d -> 4d -> d with ReLU
    cache.ff_hidden = mat_mul_nt(cache.att_out, block.ff1_w);
    for (size_t i = 0; i < cache.ff_hidden.rows(); ++i)
        for (size_t j = 0; j < cache.ff_hidden.cols(); ++j) {
            double v = cache.ff_hidden(i, j) + block.ff1_b[j];
            cache.ff_hidden(i, j) = v > 0.0 ? v : 0.0;
        }
    cache.out = mat_mul_nt(cache.ff_hidden, block.ff2_w);
    for (size_t i = 0; i < cache.out.rows(); ++i)
        for (size_t j = 0; j < cache.out.cols(); ++j) cache.out(i, j) += block.ff2_b[j];
}

ForwardCache forward_cached(const RtModel& model, std::span<const double> window) {
    const auto& config = model.config;
    if (static_cast<int>(window.size()) != config.seq_len)
        throw Error(ErrKind::ShapeMismatch, "window length != configured seq_len");
    const size_t L = window.size();
    const size_t d = static_cast<size_t>(config.model_dim);

    ForwardCache cache;
    cache.x_std.resize(L);
    for (size_t t = 0; t < L; ++t) cache.x_std[t] = (window[t] - model.input_mean) / model.input_std;

    cache.embedded = Tensor::zeros({L, d});
    for (size_t t = 0; t < L; ++t)
        for (size_t i = 0; i < d; ++i)
            cache.embedded(t, i) = model.embed_w(i, 0) * cache.x_std[t] + model.embed_b[i];

    const Tensor* current = &cache.embedded;
    cache.blocks.resize(model.blocks.size());
    for (size_t b = 0; b < model.blocks.size(); ++b) {
        block_forward_cached(model.blocks[b], *current, config, cache.blocks[b]);
        current = &cache.blocks[b].out;
    }

    cache.pooled.assign(d, 0.0);
    for (size_t t = 0; t < L; ++t)
        for (size_t i = 0; i < d; ++i) cache.pooled[i] += (*current)(t, i);
    for (auto& v : cache.pooled) v /= static_cast<double>(L);

    cache.logits.assign(config.classes, 0.0);
    for (int c = 0; c < config.classes; ++c) {
        double acc = model.head_b[c];
        for (size_t i = 0; i < d; ++i) acc += model.head_w(c, i) * cache.pooled[i];
        cache.logits[c] = acc;
    }
    cache.probs = nn::softmax(cache.logits);
    ensure_finite(cache.probs, "rt forward");
    return cache;
}

} // namespace

Tensor local_rnn_forward(const BlockParams& block, const Tensor& input, int window_w) {
    if (input.cols() != block.rnn_wx.rows())
        throw Error(ErrKind::ShapeMismatch, "rnn input width != model dim");
    BlockCache cache;
    rnn_forward_cached(block, input, window_w, cache);
    return cache.rnn_out;
}

Tensor attention_forward(const BlockParams& block, const Tensor& states, int heads) {
    if (states.cols() % static_cast<size_t>(heads) != 0)
        throw Error(ErrKind::ShapeMismatch, "state width not divisible by heads");
    BlockCache cache;
    attention_forward_cached(block, states, heads, cache);
    return cache.att_out;
}

std::vector<double> classify(const RtModel& model, std::span<const double> window) {
    return forward_cached(model, window).probs;
}

double loss_only(const RtModel& model, std::span<const double> window, int target_class) {
    const auto cache = forward_cached(model, window);
    return -std::log(std::max(cache.probs[target_class], 1e-300));
}

RtGrads zero_grads(const RtModel& model) {
    RtGrads g;
    auto zeros_like = [](const Tensor& t) { return Tensor::zeros(t.shape); };
    g.embed_w = zeros_like(model.embed_w);
    g.embed_b = zeros_like(model.embed_b);
    for (const auto& block : model.blocks) {
        BlockParams bg;
        bg.rnn_wx = zeros_like(block.rnn_wx);
        bg.rnn_wh = zeros_like(block.rnn_wh);
        bg.rnn_b = zeros_like(block.rnn_b);
        bg.wq = zeros_like(block.wq);
        bg.wk = zeros_like(block.wk);
        bg.wv = zeros_like(block.wv);
        bg.wo = zeros_like(block.wo);
        bg.ff1_w = zeros_like(block.ff1_w);
        bg.ff1_b = zeros_like(block.ff1_b);
        bg.ff2_w = zeros_like(block.ff2_w);
        bg.ff2_b = zeros_like(block.ff2_b);
        g.blocks.push_back(std::move(bg));
    }
    g.head_w = zeros_like(model.head_w);
    g.head_b = zeros_like(model.head_b);
    return g;
}

double backward(const RtModel& model, std::span<const double> window, int target_class,
                RtGrads& grads) {
    const auto& config = model.config;
    if (target_class < 0 || target_class >= config.classes)
        throw Error(ErrKind::ShapeMismatch, "target class out of range");
    const auto cache = forward_cached(model, window);
    const double loss = -std::log(std::max(cache.probs[target_class], 1e-300));

    const size_t L = static_cast<size_t>(config.seq_len);
    const size_t d = static_cast<size_t>(config.model_dim);
    const size_t heads = static_cast<size_t>(config.heads);
    const size_t dh = d / heads;
    const int w = config.window_w;

    // head + softmax cross-entropy
    std::vector<double> dlogits(cache.probs);
    dlogits[target_class] -= 1.0;
    std::vector<double> dpooled(d, 0.0);
    for (int c = 0; c < config.classes; ++c) {
        grads.head_b[c] += dlogits[c];
        for (size_t i = 0; i < d; ++i) {
            grads.head_w(c, i) += dlogits[c] * cache.pooled[i];
            dpooled[i] += model.head_w(c, i) * dlogits[c];
        }
    }

    // mean pool
    Tensor dout = Tensor::zeros({L, d});
    for (size_t t = 0; t < L; ++t)
        for (size_t i = 0; i < d; ++i) dout(t, i) = dpooled[i] / static_cast<double>(L);

    for (size_t b = model.blocks.size(); b-- > 0;) {
        const auto& block = model.blocks[b];
        const auto& bc = cache.blocks[b];
        auto& bg = grads.blocks[b];

        // feedforward backward
        Tensor dff_hidden = mat_mul(dout, block.ff2_w); // L x 4d
        {
            Tensor dW2 = mat_mul_tn(dout, bc.ff_hidden); // d x 4d
            for (size_t i = 0; i < dW2.size(); ++i) bg.ff2_w.data[i] += dW2.data[i];
            for (size_t t = 0; t < L; ++t)
                for (size_t j = 0; j < d; ++j) bg.ff2_b[j] += dout(t, j);
        }
        for (size_t i = 0; i < dff_hidden.size(); ++i)
            if (bc.ff_hidden.data[i] <= 0.0) dff_hidden.data[i] = 0.0;
        Tensor datt_out = mat_mul(dff_hidden, block.ff1_w); // L x d
        {
            Tensor dW1 = mat_mul_tn(dff_hidden, bc.att_out); // 4d x d
            for (size_t i = 0; i < dW1.size(); ++i) bg.ff1_w.data[i] += dW1.data[i];
            for (size_t t = 0; t < L; ++t)
                for (size_t j = 0; j < 4 * d; ++j) bg.ff1_b[j] += dff_hidden(t, j);
        }

        // attention backward
        Tensor datt_concat = mat_mul(datt_out, block.wo); // L x d
        {
            Tensor dWo = mat_mul_tn(datt_out, bc.att_concat); // d x d
            for (size_t i = 0; i < dWo.size(); ++i) bg.wo.data[i] += dWo.data[i];
        }
        Tensor dq = Tensor::zeros({L, d});
        Tensor dk = Tensor::zeros({L, d});
        Tensor dv = Tensor::zeros({L, d});
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        for (size_t m = 0; m < heads; ++m) {
            const size_t off = m * dh;
            const Tensor& energy = bc.energy[m];
            // dV and dEnergy
            Tensor denergy = Tensor::zeros({L, L});
            for (size_t i = 0; i < L; ++i)
                for (size_t j = 0; j < L; ++j) {
                    double acc = 0.0;
                    for (size_t c = 0; c < dh; ++c) acc += datt_concat(i, off + c) * bc.v(j, off + c);
                    denergy(i, j) = acc;
                }
            for (size_t j = 0; j < L; ++j)
                for (size_t c = 0; c < dh; ++c) {
                    double acc = 0.0;
                    for (size_t i = 0; i < L; ++i) acc += energy(i, j) * datt_concat(i, off + c);
                    dv(j, off + c) = acc;
                }
            // softmax backward per row: dS = (dE - sum(dE*E)) * E, then scale
            for (size_t i = 0; i < L; ++i) {
                double dot = 0.0;
                for (size_t j = 0; j < L; ++j) dot += denergy(i, j) * energy(i, j);
                for (size_t j = 0; j < L; ++j)
                    denergy(i, j) = (denergy(i, j) - dot) * energy(i, j) * scale;
            }
            for (size_t i = 0; i < L; ++i)
                for (size_t c = 0; c < dh; ++c) {
                    double acc_q = 0.0;
                    for (size_t j = 0; j < L; ++j) acc_q += denergy(i, j) * bc.k(j, off + c);
                    dq(i, off + c) = acc_q;
                }
            for (size_t j = 0; j < L; ++j)
                for (size_t c = 0; c < dh; ++c) {
                    double acc_k = 0.0;
                    for (size_t i = 0; i < L; ++i) acc_k += denergy(i, j) * bc.q(i, off + c);
                    dk(j, off + c) = acc_k;
                }
        }
        // project back: Q = R Wq^T etc.
        Tensor drnn = mat_mul(dq, block.wq);
        {
            Tensor tmp = mat_mul(dk, block.wk);
            for (size_t i = 0; i < tmp.size(); ++i) drnn.data[i] += tmp.data[i];
            tmp = mat_mul(dv, block.wv);
            for (size_t i = 0; i < tmp.size(); ++i) drnn.data[i] += tmp.data[i];
            Tensor dWq = mat_mul_tn(dq, bc.rnn_out);
            Tensor dWk = mat_mul_tn(dk, bc.rnn_out);
            Tensor dWv = mat_mul_tn(dv, bc.rnn_out);
            for (size_t i = 0; i < dWq.size(); ++i) {
                bg.wq.data[i] += dWq.data[i];
                bg.wk.data[i] += dWk.data[i];
                bg.wv.data[i] += dWv.data[i];
            }
        }

        // local RNN backward: each position runs an independent w-step RNN
        Tensor dinput = Tensor::zeros({L, d});
        std::vector<double> dh_vec(d), du(d), dh_prev(d);
        for (size_t t = 0; t < L; ++t) {
            for (size_t i = 0; i < d; ++i) dh_vec[i] = drnn(t, i);
            for (int j = w - 1; j >= 0; --j) {
                const long s = static_cast<long>(t) - w + 1 + j;
                const double* h_cur = &bc.rnn_hidden.data[(t * w + j) * d];
                for (size_t i = 0; i < d; ++i) du[i] = dh_vec[i] * (1.0 - h_cur[i] * h_cur[i]);
                // bias and input-weight grads
                for (size_t i = 0; i < d; ++i) bg.rnn_b[i] += du[i];
                if (s >= 0) {
                    const double* xs = &bc.input.data[static_cast<size_t>(s) * d];
                    for (size_t i = 0; i < d; ++i) {
                        double* row = &bg.rnn_wx.data[i * d];
                        for (size_t mcol = 0; mcol < d; ++mcol) row[mcol] += du[i] * xs[mcol];
                    }
                    double* dx = &dinput.data[static_cast<size_t>(s) * d];
                    for (size_t i = 0; i < d; ++i) {
                        const double* wx_row = &block.rnn_wx.data[i * d];
                        for (size_t mcol = 0; mcol < d; ++mcol) dx[mcol] += du[i] * wx_row[mcol];
                    }
                }
                if (j > 0) {
                    const double* h_prev = &bc.rnn_hidden.data[(t * w + j - 1) * d];
                    for (size_t i = 0; i < d; ++i) {
                        double* row = &bg.rnn_wh.data[i * d];
                        for (size_t mcol = 0; mcol < d; ++mcol) row[mcol] += du[i] * h_prev[mcol];
                    }
                    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
                    for (size_t i = 0; i < d; ++i) {
                        const double* wh_row = &block.rnn_wh.data[i * d];
                        for (size_t mcol = 0; mcol < d; ++mcol) dh_prev[mcol] += du[i] * wh_row[mcol];
                    }
                    dh_vec = dh_prev;
                }
                // j == 0: previous hidden is the zero init, nothing upstream
            }
        }
        dout = std::move(dinput);
    }

    // embedding backward
    for (size_t t = 0; t < L; ++t)
        for (size_t i = 0; i < d; ++i) {
            grads.embed_w(i, 0) += dout(t, i) * cache.x_std[t];
            grads.embed_b[i] += dout(t, i);
        }
    return loss;
}

namespace {

std::vector<Tensor*> tensor_list(RtModel& model) {
    std::vector<Tensor*> list{&model.embed_w, &model.embed_b};
    for (auto& block : model.blocks) {
        list.push_back(&block.rnn_wx);
        list.push_back(&block.rnn_wh);
        list.push_back(&block.rnn_b);
        list.push_back(&block.wq);
        list.push_back(&block.wk);
        list.push_back(&block.wv);
        list.push_back(&block.wo);
        list.push_back(&block.ff1_w);
        list.push_back(&block.ff1_b);
        list.push_back(&block.ff2_w);
        list.push_back(&block.ff2_b);
    }
    list.push_back(&model.head_w);
    list.push_back(&model.head_b);
    return list;
}

std::vector<Tensor*> tensor_list(RtGrads& grads) {
    std::vector<Tensor*> list{&grads.embed_w, &grads.embed_b};
    for (auto& block : grads.blocks) {
        list.push_back(&block.rnn_wx);
        list.push_back(&block.rnn_wh);
        list.push_back(&block.rnn_b);
        list.push_back(&block.wq);
        list.push_back(&block.wk);
        list.push_back(&block.wv);
        list.push_back(&block.wo);
        list.push_back(&block.ff1_w);
        list.push_back(&block.ff1_b);
        list.push_back(&block.ff2_w);
        list.push_back(&block.ff2_b);
    }
    list.push_back(&grads.head_w);
    list.push_back(&grads.head_b);
    return list;
}

} // namespace

std::vector<std::span<double>> param_views(RtModel& model) {
    std::vector<std::span<double>> views;
    for (Tensor* t : tensor_list(model)) views.emplace_back(t->data);
    return views;
}

std::vector<std::span<double>> grad_views(RtGrads& grads) {
    std::vector<std::span<double>> views;
    for (Tensor* t : tensor_list(grads)) views.emplace_back(t->data);
    return views;
}

std::vector<double> pretrain(RtModel& model, const std::vector<MeterWindow>& dataset,
                             const nn::TrainConfig& config) {
    if (config.epochs < 1)
        throw Error(ErrKind::InvalidInput, "epochs must be >= 1");
    if (dataset.empty())
        throw Error(ErrKind::TooFewSamples, "empty pretraining dataset");
    bool has_pos = false, has_neg = false;
    std::set<std::string> fingerprints;
    for (const auto& window : dataset) {
        if (static_cast<int>(window.values.size()) != model.config.seq_len)
            throw Error(ErrKind::ShapeMismatch, "meter window length != seq_len");
        if (window.label == 0) has_neg = true;
        else has_pos = true;
        fingerprints.insert(window.grid_fingerprint);
    }
    if (!has_pos || !has_neg)
        throw Error(ErrKind::SingleClassInput, "pretraining needs both labels");
    if (fingerprints.size() < 2)
        throw Error(ErrKind::InvalidInput, "pretraining needs windows from multiple grids");

    // training-set voltage statistics, stored for inference
    double mean = 0.0;
    size_t count = 0;
    for (const auto& window : dataset)
        for (double v : window.values) {
            mean += v;
            ++count;
        }
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (const auto& window : dataset)
        for (double v : window.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(count);
    model.input_mean = mean;
    model.input_std = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;

    std::vector<size_t> sizes;
    RtGrads grads = zero_grads(model);
    for (auto view : grad_views(grads)) sizes.push_back(view.size());
    nn::Optimizer opt(config, sizes);

    rng::Stream shuffle_stream(rng::derive(config.seed, {0x5f1eULL}));
    const size_t n = dataset.size();
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
            const size_t batch_n = std::min<size_t>(config.batch_size, n - start);
            grads = zero_grads(model);
            double batch_loss = 0.0;
            for (size_t i = 0; i < batch_n; ++i) {
                const auto& window = dataset[order[start + i]];
                batch_loss += backward(model, window.values, window.label, grads);
            }
            epoch_loss += batch_loss;
            // mean loss over the batch
            auto gviews = grad_views(grads);
            for (auto view : gviews)
                for (auto& g : view) g /= static_cast<double>(batch_n);
            std::vector<std::span<const double>> const_views(gviews.begin(), gviews.end());
            opt.step(param_views(model), const_views);
        }
        for (auto view : param_views(model))
            ensure_finite(std::vector<double>(view.begin(), view.end()), "rt training step");
        history.push_back(epoch_loss / static_cast<double>(n));
    }
    return history;
}

std::optional<DeviceFlag> detect(const RtModel& model, const MeterWindow& window,
                                 double threshold) {
    const auto probs = classify(model, window.values);
    const double p = probs[1];
    if (p < threshold) return std::nullopt;
    DeviceFlag flag;
    flag.bus = window.bus;
    flag.use_case = model.use_case;
    flag.probability = p;
    flag.day = window.day;
    return flag;
}

nlohmann::json model_to_json(const RtModel& model) {
    auto block_json = [](const BlockParams& block) {
        return nlohmann::json{{"rnn_wx", block.rnn_wx.data}, {"rnn_wh", block.rnn_wh.data},
                              {"rnn_b", block.rnn_b.data},   {"wq", block.wq.data},
                              {"wk", block.wk.data},         {"wv", block.wv.data},
                              {"wo", block.wo.data},         {"ff1_w", block.ff1_w.data},
                              {"ff1_b", block.ff1_b.data},   {"ff2_w", block.ff2_w.data},
                              {"ff2_b", block.ff2_b.data}};
    };
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& block : model.blocks) blocks.push_back(block_json(block));
    return {{"format_version", 1},
            {"kind", "rt_detector"},
            {"config",
             {{"window_w", model.config.window_w},
              {"model_dim", model.config.model_dim},
              {"heads", model.config.heads},
              {"blocks", model.config.blocks},
              {"classes", model.config.classes},
              {"seq_len", model.config.seq_len}}},
            {"embed_w", model.embed_w.data},
            {"embed_b", model.embed_b.data},
            {"blocks", blocks},
            {"head_w", model.head_w.data},
            {"head_b", model.head_b.data},
            {"normalization", {{"mean", model.input_mean}, {"std", model.input_std}}},
            {"use_case", features::label_name(model.use_case)}};
}

RtModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "rt_detector" ||
            j.at("format_version").get<int>() != 1)
            throw Error(ErrKind::ParseError, "not a v1 rt_detector file");
        RtConfig config;
        const auto& cj = j.at("config");
        config.window_w = cj.at("window_w").get<int>();
        config.model_dim = cj.at("model_dim").get<int>();
        config.heads = cj.at("heads").get<int>();
        config.blocks = cj.at("blocks").get<int>();
        config.classes = cj.at("classes").get<int>();
        config.seq_len = cj.at("seq_len").get<int>();

        RtModel model = make_model(config, 0);
        auto fill = [](Tensor& t, const nlohmann::json& arr, const char* what) {
            auto values = arr.get<std::vector<double>>();
            if (values.size() != t.size())
                throw Error(ErrKind::ParseError, std::string("rt json: bad array size for ") + what);
            t.data = std::move(values);
        };
        fill(model.embed_w, j.at("embed_w"), "embed_w");
        fill(model.embed_b, j.at("embed_b"), "embed_b");
        const auto& blocks = j.at("blocks");
        if (blocks.size() != model.blocks.size())
            throw Error(ErrKind::ParseError, "rt json: block count mismatch");
        for (size_t b = 0; b < model.blocks.size(); ++b) {
            auto& block = model.blocks[b];
            const auto& bj = blocks[b];
            fill(block.rnn_wx, bj.at("rnn_wx"), "rnn_wx");
            fill(block.rnn_wh, bj.at("rnn_wh"), "rnn_wh");
            fill(block.rnn_b, bj.at("rnn_b"), "rnn_b");
            fill(block.wq, bj.at("wq"), "wq");
            fill(block.wk, bj.at("wk"), "wk");
            fill(block.wv, bj.at("wv"), "wv");
            fill(block.wo, bj.at("wo"), "wo");
            fill(block.ff1_w, bj.at("ff1_w"), "ff1_w");
            fill(block.ff1_b, bj.at("ff1_b"), "ff1_b");
            fill(block.ff2_w, bj.at("ff2_w"), "ff2_w");
            fill(block.ff2_b, bj.at("ff2_b"), "ff2_b");
        }
        fill(model.head_w, j.at("head_w"), "head_w");
        fill(model.head_b, j.at("head_b"), "head_b");
        model.input_mean = j.at("normalization").at("mean").get<double>();
        model.input_std = j.at("normalization").at("std").get<double>();
        model.use_case = features::label_from_name(j.at("use_case").get<std::string>());
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("rt json: ") + e.what());
    }
}

} // namespace demads::rt
