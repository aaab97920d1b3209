#ifndef DEMADS_SVM_HPP
#define DEMADS_SVM_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "demads/features.hpp"

namespace demads::svm {

struct LinearKernel {};
struct RbfKernel {
    double gamma = 1.0;
};
using Kernel = std::variant<LinearKernel, RbfKernel>;

double kernel_eval(const Kernel& kernel, std::span<const double> a, std::span<const double> b);
Kernel default_kernel(size_t feature_count); // Rbf with gamma = 1/feature_count

struct SmoConfig {
    double c = 10.0;
    double tol = 1e-3;
    int max_passes = 20;
    std::uint64_t seed = 0x5403; // second-index selection stream
};

struct SvmModel {
    Kernel kernel;
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> dual_coefs; // alpha_i * y_i
    double bias = 0.0;
    features::Label positive = features::Label::Correct;
    features::Label negative = features::Label::Abnormal;
    double c = 10.0;
    double tol = 1e-3;
};

// Simplified SMO: sweeps until no alpha changes for max_passes consecutive
// passes. Labels must contain both +1 and -1. Features must be finite
// (standardized upstream).
SvmModel train_binary(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                      const Kernel& kernel, const SmoConfig& config);

double decision_value(const SvmModel& model, std::span<const double> x);
// sign of the decision value; ties (f == 0) resolve to the negative class
int predict(const SvmModel& model, std::span<const double> x);

struct MultiClassSvm {
    std::vector<features::Label> labels; // ascending by name
    std::vector<SvmModel> pair_models;   // one per unordered label pair
};

// One-vs-one training; within each pair the name-wise smaller label is the
// positive class. Prediction is majority vote; vote ties break on the
// largest accumulated |decision value|, then on name order.
MultiClassSvm train_multiclass(const std::vector<std::vector<double>>& x,
                               const std::vector<features::Label>& labels, const Kernel& kernel,
                               const SmoConfig& config);
features::Label predict_multiclass(const MultiClassSvm& model, std::span<const double> x);

nlohmann::json kernel_to_json(const Kernel& kernel);
Kernel kernel_from_json(const nlohmann::json& j);

// Versioned model file; the optional standardizer lets saved models be
// applied to raw (unstandardized) feature rows.
nlohmann::json multiclass_to_json(const MultiClassSvm& model,
                                  const features::Standardizer* standardizer = nullptr);
MultiClassSvm multiclass_from_json(const nlohmann::json& j,
                                   std::optional<features::Standardizer>* standardizer = nullptr);

} // namespace demads::svm

#endif
