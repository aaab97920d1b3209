#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "demads/error.hpp"
#include "demads/rng.hpp"
#include "demads/svm.hpp"

using namespace demads;
using features::Label;

static void check_duals(const svm::SvmModel& model, double c) {
    double sum = 0.0;
    bool pos = false, neg = false;
    for (double d : model.dual_coefs) {
        CHECK(std::abs(d) <= c + 1e-12); // box constraint on alpha
        sum += d;
        (d > 0 ? pos : neg) = true;
    }
    CHECK(std::abs(sum) <= 1e-8); // dual equality constraint
    CHECK(pos);
    CHECK(neg); // at least one support vector per side
}

TEST_CASE("analytic 1-d pair: maximum margin boundary at the midpoint") {
    const std::vector<std::vector<double>> x{{-1.0}, {1.0}};
    const std::vector<int> y{-1, 1};
    svm::SmoConfig config;
    config.c = 1e6;
    const auto model = svm::train_binary(x, y, svm::LinearKernel{}, config);

    CHECK(std::abs(svm::decision_value(model, std::vector<double>{0.0})) <= 1e-6);
    CHECK(svm::decision_value(model, std::vector<double>{1.0}) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(svm::decision_value(model, std::vector<double>{-1.0}) ==
          doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(svm::decision_value(model, std::vector<double>{0.5}) ==
          doctest::Approx(0.5).epsilon(1e-3));
    CHECK(svm::predict(model, std::vector<double>{0.25}) == 1);
    CHECK(svm::predict(model, std::vector<double>{-0.25}) == -1);
    check_duals(model, config.c);
}

TEST_CASE("xor with an rbf kernel reaches full training accuracy") {
    const std::vector<std::vector<double>> x{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    const std::vector<int> y{-1, 1, 1, -1};
    svm::SmoConfig config;
    config.c = 10.0;
    const auto model = svm::train_binary(x, y, svm::RbfKernel{1.0}, config);
    for (size_t i = 0; i < x.size(); ++i) CHECK(svm::predict(model, x[i]) == y[i]);
    check_duals(model, config.c);
}

TEST_CASE("single-class input is rejected") {
    const std::vector<std::vector<double>> x{{0.0}, {1.0}};
    CHECK_THROWS_AS(svm::train_binary(x, {1, 1}, svm::LinearKernel{}, {}), Error);
    CHECK_THROWS_AS(svm::train_binary(x, {1, 2}, svm::LinearKernel{}, {}), Error);
}

TEST_CASE("non-finite features are rejected") {
    const std::vector<std::vector<double>> x{{0.0}, {std::nan("")}};
    CHECK_THROWS_AS(svm::train_binary(x, {1, -1}, svm::LinearKernel{}, {}), Error);
}

TEST_CASE("rbf kernel: K(x,x) = 1 and gram entries stay in (0,1]") {
    rng::Stream stream(4);
    const svm::Kernel kernel = svm::RbfKernel{0.7};
    for (int i = 0; i < 20; ++i) {
        std::vector<double> a{stream.normal(), stream.normal(), stream.normal()};
        std::vector<double> b{stream.normal(), stream.normal(), stream.normal()};
        CHECK(svm::kernel_eval(kernel, a, a) == 1.0);
        const double k = svm::kernel_eval(kernel, a, b);
        CHECK(k > 0.0);
        CHECK(k <= 1.0);
        CHECK(k == svm::kernel_eval(kernel, b, a)); // symmetry
    }
}

TEST_CASE("antisymmetric dataset gives an antisymmetric decision function") {
    rng::Stream stream(6);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 12; ++i) {
        std::vector<double> p{stream.uniform(0.3, 1.5), stream.uniform(-0.5, 0.5)};
        x.push_back(p);
        y.push_back(1);
        x.push_back({-p[0], -p[1]});
        y.push_back(-1);
    }
    svm::SmoConfig config;
    config.c = 10.0;
    const auto model = svm::train_binary(x, y, svm::LinearKernel{}, config);
    for (int i = 0; i < 10; ++i) {
        const std::vector<double> probe{stream.uniform(-1, 1), stream.uniform(-1, 1)};
        const std::vector<double> mirrored{-probe[0], -probe[1]};
        CHECK(svm::decision_value(model, probe) ==
              doctest::Approx(-svm::decision_value(model, mirrored)).epsilon(1e-3));
    }
}

TEST_CASE("training is deterministic given sample order and seed") {
    rng::Stream stream(14);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
        const double cls = i % 2 ? 1.0 : -1.0;
        x.push_back({cls + stream.normal(0, 0.3), stream.normal(0, 0.3)});
        y.push_back(static_cast<int>(cls));
    }
    svm::SmoConfig config;
    config.seed = 42;
    const auto a = svm::train_binary(x, y, svm::RbfKernel{0.5}, config);
    const auto b = svm::train_binary(x, y, svm::RbfKernel{0.5}, config);
    CHECK(a.dual_coefs == b.dual_coefs);
    CHECK(a.bias == b.bias);
}

static void make_blobs(std::vector<std::vector<double>>& x, std::vector<Label>& labels) {
    rng::Stream stream(21);
    const std::vector<std::pair<double, double>> centers{{0, 0}, {4, 0}, {0, 4}};
    const std::vector<Label> names{Label::Correct, Label::Wrong, Label::Inverted};
    for (size_t c = 0; c < centers.size(); ++c)
        for (int i = 0; i < 15; ++i) {
            x.push_back({centers[c].first + stream.normal(0, 0.4),
                         centers[c].second + stream.normal(0, 0.4)});
            labels.push_back(names[c]);
        }
}

TEST_CASE("multiclass: three separated blobs reach full training accuracy") {
    std::vector<std::vector<double>> x;
    std::vector<Label> labels;
    make_blobs(x, labels);
    svm::SmoConfig config;
    config.c = 10.0;
    const auto model = svm::train_multiclass(x, labels, svm::LinearKernel{}, config);
    CHECK(model.pair_models.size() == 3);
    for (size_t i = 0; i < x.size(); ++i) CHECK(svm::predict_multiclass(model, x[i]) == labels[i]);
    for (const auto& pair : model.pair_models) check_duals(pair, config.c);
}

TEST_CASE("multiclass with two labels equals the binary model") {
    rng::Stream stream(31);
    std::vector<std::vector<double>> x;
    std::vector<Label> labels;
    std::vector<int> y;
    for (int i = 0; i < 24; ++i) {
        const bool wrong = i % 2;
        x.push_back({(wrong ? 1.5 : -1.5) + stream.normal(0, 0.4), stream.normal()});
        labels.push_back(wrong ? Label::Wrong : Label::Correct);
        y.push_back(wrong ? -1 : 1); // Correct < Wrong by name, so Correct is +1
    }
    svm::SmoConfig config;
    const auto multi = svm::train_multiclass(x, labels, svm::RbfKernel{0.5}, config);
    const auto binary = svm::train_binary(x, y, svm::RbfKernel{0.5}, config);
    for (int i = 0; i < 10; ++i) {
        const std::vector<double> probe{stream.uniform(-2, 2), stream.uniform(-2, 2)};
        const Label expected = svm::predict(binary, probe) > 0 ? Label::Correct : Label::Wrong;
        CHECK(svm::predict_multiclass(multi, probe) == expected);
    }
}

TEST_CASE("relabeling malfunctions as abnormal equals training on grouped labels") {
    // grouping semantics: {Wrong, Inverted} -> Abnormal, then binary
    std::vector<std::vector<double>> x;
    std::vector<Label> labels;
    make_blobs(x, labels);
    std::vector<Label> grouped;
    std::vector<int> y;
    for (Label l : labels) {
        grouped.push_back(l == Label::Correct ? Label::Correct : Label::Abnormal);
        y.push_back(l == Label::Correct ? -1 : 1); // Abnormal < Correct by name
    }
    svm::SmoConfig config;
    const auto multi = svm::train_multiclass(x, grouped, svm::RbfKernel{0.5}, config);
    REQUIRE(multi.pair_models.size() == 1);
    const auto binary = svm::train_binary(x, y, svm::RbfKernel{0.5}, config);
    CHECK(multi.pair_models[0].dual_coefs == binary.dual_coefs);
    CHECK(multi.pair_models[0].bias == binary.bias);
    CHECK(multi.pair_models[0].positive == Label::Abnormal);
}

TEST_CASE("model json round trip preserves decisions exactly") {
    std::vector<std::vector<double>> x;
    std::vector<Label> labels;
    make_blobs(x, labels);
    svm::SmoConfig config;
    const auto model = svm::train_multiclass(x, labels, svm::RbfKernel{0.5}, config);
    const auto j = svm::multiclass_to_json(model);
    const auto restored = svm::multiclass_from_json(nlohmann::json::parse(j.dump()));
    rng::Stream stream(2);
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> probe{stream.uniform(-1, 5), stream.uniform(-1, 5)};
        CHECK(svm::predict_multiclass(model, probe) == svm::predict_multiclass(restored, probe));
        for (size_t p = 0; p < model.pair_models.size(); ++p)
            CHECK(svm::decision_value(model.pair_models[p], probe) ==
                  svm::decision_value(restored.pair_models[p], probe));
    }
}
