#include "demads/svm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "demads/error.hpp"
#include "demads/rng.hpp"

namespace demads::svm {

double kernel_eval(const Kernel& kernel, std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error(ErrKind::ShapeMismatch, "kernel arguments have differing dimensions");
    if (std::holds_alternative<LinearKernel>(kernel)) {
        double dot = 0.0;
        for (size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
        return dot;
    }
    const double gamma = std::get<RbfKernel>(kernel).gamma;
    double d2 = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

Kernel default_kernel(size_t feature_count) {
    return RbfKernel{1.0 / static_cast<double>(std::max<size_t>(feature_count, 1))};
}

SvmModel train_binary(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                      const Kernel& kernel, const SmoConfig& config) {
    const size_t n = x.size();
    if (n == 0 || y.size() != n)
        throw Error(ErrKind::LengthMismatch, "svm training set empty or labels mismatched");
    bool has_pos = false, has_neg = false;
    for (int label : y) {
        if (label == 1) has_pos = true;
        else if (label == -1) has_neg = true;
        else throw Error(ErrKind::InvalidInput, "labels must be +-1");
    }
    if (!has_pos || !has_neg)
        throw Error(ErrKind::SingleClassInput, "svm training needs both classes");
    for (const auto& row : x)
        for (double v : row)
            if (!std::isfinite(v))
                throw Error(ErrKind::NonFiniteInput, "non-finite feature in svm training set");

    std::vector<double> gram(n * n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i; j < n; ++j)
            gram[i * n + j] = gram[j * n + i] = kernel_eval(kernel, x[i], x[j]);

    std::vector<double> alpha(n, 0.0);
    double b = 0.0;
    auto decision = [&](size_t i) {
        double f = b;
        for (size_t k = 0; k < n; ++k)
            if (alpha[k] != 0.0) f += alpha[k] * y[k] * gram[k * n + i];
        return f;
    };

    rng::Stream pick(config.seed);
    int passes = 0;
    while (passes < config.max_passes) {
        int changed = 0;
        for (size_t i = 0; i < n; ++i) {
            const double e_i = decision(i) - y[i];
            const bool violates = (y[i] * e_i < -config.tol && alpha[i] < config.c) ||
                                  (y[i] * e_i > config.tol && alpha[i] > 0.0);
            if (!violates) continue;

            size_t j = pick.below(n - 1);
            if (j >= i) ++j;
            const double e_j = decision(j) - y[j];

            const double ai_old = alpha[i], aj_old = alpha[j];
            double lo, hi;
            if (y[i] != y[j]) {
                lo = std::max(0.0, aj_old - ai_old);
                hi = std::min(config.c, config.c + aj_old - ai_old);
            } else {
                lo = std::max(0.0, ai_old + aj_old - config.c);
                hi = std::min(config.c, ai_old + aj_old);
            }
            if (lo >= hi) continue;

            const double eta = 2.0 * gram[i * n + j] - gram[i * n + i] - gram[j * n + j];
            if (eta >= 0.0) continue;

            double aj_new = aj_old - y[j] * (e_i - e_j) / eta;
            aj_new = std::clamp(aj_new, lo, hi);
            if (std::abs(aj_new - aj_old) < 1e-7) continue;
            const double ai_new = ai_old + y[i] * y[j] * (aj_old - aj_new);

            alpha[i] = ai_new;
            alpha[j] = aj_new;

            const double b1 = b - e_i - y[i] * (ai_new - ai_old) * gram[i * n + i] -
                              y[j] * (aj_new - aj_old) * gram[i * n + j];
            const double b2 = b - e_j - y[i] * (ai_new - ai_old) * gram[i * n + j] -
                              y[j] * (aj_new - aj_old) * gram[j * n + j];
            if (ai_new > 0.0 && ai_new < config.c) b = b1;
            else if (aj_new > 0.0 && aj_new < config.c) b = b2;
            else b = 0.5 * (b1 + b2);
            ++changed;
        }
        passes = changed == 0 ? passes + 1 : 0;
    }

    // final bias from the KKT conditions: margin support vectors satisfy
    // y_i = f(x_i) exactly, so average y_i - (f(x_i) - b) over them
    {
        double sum = 0.0;
        size_t margin_count = 0;
        double lo = -1e300, hi = 1e300; // fallback midpoint bounds
        for (size_t i = 0; i < n; ++i) {
            double f_nobias = 0.0;
            for (size_t k = 0; k < n; ++k)
                if (alpha[k] != 0.0) f_nobias += alpha[k] * y[k] * gram[k * n + i];
            if (alpha[i] > 1e-9 && alpha[i] < config.c - 1e-9) {
                sum += y[i] - f_nobias;
                ++margin_count;
            }
            if (y[i] == 1) hi = std::min(hi, 1.0 - f_nobias);
            else lo = std::max(lo, -1.0 - f_nobias);
        }
        if (margin_count > 0) b = sum / static_cast<double>(margin_count);
        else if (lo <= hi) b = 0.5 * (lo + hi);
    }

    SvmModel model;
    model.kernel = kernel;
    model.bias = b;
    model.c = config.c;
    model.tol = config.tol;
    for (size_t i = 0; i < n; ++i) {
        if (alpha[i] > 1e-12) {
            model.support_vectors.push_back(x[i]);
            model.dual_coefs.push_back(alpha[i] * y[i]);
        }
    }
    return model;
}

double decision_value(const SvmModel& model, std::span<const double> x) {
    double f = model.bias;
    for (size_t k = 0; k < model.support_vectors.size(); ++k)
        f += model.dual_coefs[k] * kernel_eval(model.kernel, model.support_vectors[k], x);
    return f;
}

int predict(const SvmModel& model, std::span<const double> x) {
    return decision_value(model, x) > 0.0 ? 1 : -1;
}

namespace {

bool name_less(features::Label a, features::Label b) {
    return std::string_view(features::label_name(a)) < std::string_view(features::label_name(b));
}

} // namespace

MultiClassSvm train_multiclass(const std::vector<std::vector<double>>& x,
                               const std::vector<features::Label>& labels, const Kernel& kernel,
                               const SmoConfig& config) {
    if (x.size() != labels.size())
        throw Error(ErrKind::LengthMismatch, "samples/labels count mismatch");
    std::set<features::Label> present(labels.begin(), labels.end());
    if (present.size() < 2)
        throw Error(ErrKind::SingleClassInput, "multiclass training needs >= 2 labels");

    MultiClassSvm model;
    model.labels.assign(present.begin(), present.end());
    std::sort(model.labels.begin(), model.labels.end(), name_less);

    for (size_t a = 0; a < model.labels.size(); ++a) {
        for (size_t b = a + 1; b < model.labels.size(); ++b) {
            std::vector<std::vector<double>> px;
            std::vector<int> py;
            for (size_t i = 0; i < x.size(); ++i) {
                if (labels[i] == model.labels[a]) {
                    px.push_back(x[i]);
                    py.push_back(1);
                } else if (labels[i] == model.labels[b]) {
                    px.push_back(x[i]);
                    py.push_back(-1);
                }
            }
            SvmModel pair = train_binary(px, py, kernel, config);
            pair.positive = model.labels[a];
            pair.negative = model.labels[b];
            model.pair_models.push_back(std::move(pair));
        }
    }
    return model;
}

features::Label predict_multiclass(const MultiClassSvm& model, std::span<const double> x) {
    if (model.pair_models.empty())
        throw Error(ErrKind::InvalidInput, "empty multiclass model");
    std::map<features::Label, int> votes;
    std::map<features::Label, double> strength; // accumulated |f| of won pairs
    for (const auto& pair : model.pair_models) {
        const double f = decision_value(pair, x);
        const features::Label winner = f > 0.0 ? pair.positive : pair.negative;
        votes[winner] += 1;
        strength[winner] += std::abs(f);
    }
    features::Label best = model.labels.front();
    int best_votes = -1;
    double best_strength = 0.0;
    for (features::Label label : model.labels) {
        const int v = votes.count(label) ? votes[label] : 0;
        const double s = strength.count(label) ? strength[label] : 0.0;
        if (v > best_votes || (v == best_votes && s > best_strength)) {
            best = label;
            best_votes = v;
            best_strength = s;
        }
        // equal votes and strength: keep the earlier (name-ordered) label
    }
    return best;
}

nlohmann::json kernel_to_json(const Kernel& kernel) {
    if (std::holds_alternative<LinearKernel>(kernel)) return {{"type", "linear"}};
    return {{"type", "rbf"}, {"gamma", std::get<RbfKernel>(kernel).gamma}};
}

Kernel kernel_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "linear") return LinearKernel{};
    if (type == "rbf") {
        RbfKernel k;
        k.gamma = j.at("gamma").get<double>();
        if (!(k.gamma > 0.0) || !std::isfinite(k.gamma))
            throw Error(ErrKind::ParseError, "rbf gamma must be positive and finite");
        return k;
    }
    throw Error(ErrKind::ParseError, "unknown kernel type '" + type + "'");
}

nlohmann::json multiclass_to_json(const MultiClassSvm& model,
                                  const features::Standardizer* standardizer) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& pair : model.pair_models) {
        pairs.push_back({{"positive", features::label_name(pair.positive)},
                         {"negative", features::label_name(pair.negative)},
                         {"bias", pair.bias},
                         {"c", pair.c},
                         {"tol", pair.tol},
                         {"duals", pair.dual_coefs},
                         {"support_vectors", pair.support_vectors}});
    }
    nlohmann::json labels = nlohmann::json::array();
    for (features::Label label : model.labels) labels.push_back(features::label_name(label));
    nlohmann::json j{{"format_version", 1},
                     {"kind", "svm_multiclass"},
                     {"labels", labels},
                     {"kernel", kernel_to_json(model.pair_models.empty()
                                                   ? Kernel(LinearKernel{})
                                                   : model.pair_models.front().kernel)},
                     {"pairs", pairs}};
    if (standardizer) j["standardizer"] = features::standardizer_to_json(*standardizer);
    return j;
}

MultiClassSvm multiclass_from_json(const nlohmann::json& j,
                                   std::optional<features::Standardizer>* standardizer) {
    MultiClassSvm model;
    try {
        if (j.at("kind").get<std::string>() != "svm_multiclass" ||
            j.at("format_version").get<int>() != 1)
            throw Error(ErrKind::ParseError, "not a v1 svm_multiclass file");
        const Kernel kernel = kernel_from_json(j.at("kernel"));
        for (const auto& name : j.at("labels"))
            model.labels.push_back(features::label_from_name(name.get<std::string>()));
        for (const auto& pj : j.at("pairs")) {
            SvmModel pair;
            pair.kernel = kernel;
            pair.positive = features::label_from_name(pj.at("positive").get<std::string>());
            pair.negative = features::label_from_name(pj.at("negative").get<std::string>());
            pair.bias = pj.at("bias").get<double>();
            pair.c = pj.at("c").get<double>();
            pair.tol = pj.at("tol").get<double>();
            pair.dual_coefs = pj.at("duals").get<std::vector<double>>();
            pair.support_vectors = pj.at("support_vectors").get<std::vector<std::vector<double>>>();
            if (pair.dual_coefs.size() != pair.support_vectors.size())
                throw Error(ErrKind::ParseError, "duals/support vector counts differ");
            model.pair_models.push_back(std::move(pair));
        }
        if (standardizer) {
            if (j.contains("standardizer"))
                *standardizer = features::standardizer_from_json(j.at("standardizer"));
            else
                standardizer->reset();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("svm json: ") + e.what());
    }
    return model;
}

} // namespace demads::svm
