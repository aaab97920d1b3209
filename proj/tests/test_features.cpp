#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "demads/error.hpp"
#include "demads/eval.hpp"
#include "demads/features.hpp"
#include "demads/rng.hpp"

using namespace demads;
using features::Label;

TEST_CASE("condense_day: constant channel") {
    Tensor day = Tensor::zeros({48, 1});
    for (auto& v : day.data) v = 3.25;
    const auto f = features::condense_day(day);
    REQUIRE(f.size() == 31);
    for (size_t i = 0; i < 7; ++i)
        CHECK(f[i] == (i == 1 ? 0.0 : 3.25)); // std is the second entry
    for (size_t h = 0; h < 24; ++h) CHECK(f[7 + h] == 3.25);
}

TEST_CASE("condense_day: two-point statistics") {
    Tensor day({2, 1}, {0.0, 1.0});
    const auto f = features::condense_day(day);
    CHECK(f[0] == 0.5);  // mean
    CHECK(f[1] == 0.5);  // population std
    CHECK(f[2] == 0.0);  // min
    CHECK(f[3] == 1.0);  // max
    CHECK(f[4] == 0.25); // q25, linear interpolation
    CHECK(f[5] == 0.5);  // median
    CHECK(f[6] == 0.75); // q75
}

TEST_CASE("condense_day: four channels give 124 features") {
    Tensor day = Tensor::zeros({96, 4});
    rng::Stream stream(1);
    for (auto& v : day.data) v = stream.uniform01();
    CHECK(features::condense_day(day).size() == 124);
}

TEST_CASE("condense_day: errors on degenerate input") {
    CHECK_THROWS_AS(features::condense_day(Tensor::zeros({1, 2})), Error);
    Tensor day = Tensor::zeros({4, 1});
    day.data[2] = std::nan("");
    CHECK_THROWS_AS(features::condense_day(day), Error);
}

TEST_CASE("condense_day: permuting timesteps within an hour changes nothing") {
    const size_t steps = 96; // 4 per hour
    Tensor day = Tensor::zeros({steps, 2});
    rng::Stream stream(7);
    for (auto& v : day.data) v = stream.normal();
    const auto base = features::condense_day(day);

    Tensor shuffled = day;
    for (size_t hour = 0; hour < 24; ++hour) {
        // reverse the 4 samples of each hour: stays inside the hour bucket
        for (size_t c = 0; c < 2; ++c) {
            std::vector<double> vals;
            for (size_t k = 0; k < 4; ++k) vals.push_back(day(hour * 4 + k, c));
            std::reverse(vals.begin(), vals.end());
            for (size_t k = 0; k < 4; ++k) shuffled(hour * 4 + k, c) = vals[k];
        }
    }
    const auto permuted = features::condense_day(shuffled);
    for (size_t i = 0; i < base.size(); ++i)
        CHECK(permuted[i] == doctest::Approx(base[i]).epsilon(1e-12));
}

TEST_CASE("condense_day: duplicating timesteps preserves the order-free statistics") {
    const size_t steps = 96;
    Tensor day = Tensor::zeros({steps, 1});
    rng::Stream stream(9);
    for (auto& v : day.data) v = stream.normal();
    Tensor doubled = Tensor::zeros({2 * steps, 1});
    for (size_t t = 0; t < steps; ++t) {
        doubled(2 * t, 0) = day(t, 0);
        doubled(2 * t + 1, 0) = day(t, 0);
    }
    const auto base = features::condense_day(day);
    const auto dup = features::condense_day(doubled);
    // mean, std, min, max and all hourly means are exactly cadence-free;
    // the interpolated percentiles shift by O(1/n) and are excluded here
    const std::vector<size_t> order_free{0, 1, 2, 3};
    for (size_t i : order_free) CHECK(dup[i] == doctest::Approx(base[i]).epsilon(1e-12));
    for (size_t h = 0; h < 24; ++h)
        CHECK(dup[7 + h] == doctest::Approx(base[7 + h]).epsilon(1e-12));
}

TEST_CASE("standardizer: two-sample fit and zero-variance guard") {
    const std::vector<std::vector<double>> rows{{0.0, 5.0}, {2.0, 5.0}};
    const auto s = features::fit_standardizer(rows);
    CHECK(s.mean == std::vector<double>{1.0, 5.0});
    CHECK(s.std_dev == std::vector<double>{1.0, 1.0}); // second feature guarded
    const auto a = features::apply(s, rows[0]);
    CHECK(a == std::vector<double>{-1.0, 0.0});
    const auto b = features::apply(s, rows[1]);
    CHECK(b == std::vector<double>{1.0, 0.0});
}

TEST_CASE("standardizer: apply then invert is the identity") {
    rng::Stream stream(3);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> row;
        for (int j = 0; j < 5; ++j) row.push_back(stream.normal(2.0, 3.0));
        rows.push_back(row);
    }
    const auto s = features::fit_standardizer(rows);
    for (const auto& row : rows) {
        const auto round = features::invert(s, features::apply(s, row));
        for (size_t i = 0; i < row.size(); ++i)
            CHECK(round[i] == doctest::Approx(row[i]).epsilon(1e-12));
    }
    // applied training set: mean 0, std 1
    std::vector<double> mean(5, 0.0), var(5, 0.0);
    for (const auto& row : rows) {
        const auto z = features::apply(s, row);
        for (size_t i = 0; i < 5; ++i) mean[i] += z[i];
    }
    for (auto& m : mean) m /= 10.0;
    for (const auto& row : rows) {
        const auto z = features::apply(s, row);
        for (size_t i = 0; i < 5; ++i) var[i] += (z[i] - mean[i]) * (z[i] - mean[i]);
    }
    for (size_t i = 0; i < 5; ++i) {
        CHECK(std::abs(mean[i]) <= 1e-9);
        CHECK(std::abs(std::sqrt(var[i] / 10.0) - 1.0) <= 1e-9);
    }
}

TEST_CASE("standardizer: too few samples") {
    CHECK_THROWS_AS(features::fit_standardizer(std::vector<std::vector<double>>{{1.0}}), Error);
}

TEST_CASE("dataset csv round trip keeps labels, provenance and features") {
    std::vector<features::DailySample> samples;
    rng::Stream stream(5);
    for (int i = 0; i < 6; ++i) {
        features::DailySample sample;
        sample.day = i;
        sample.label = i % 2 ? Label::Wrong : Label::Correct;
        sample.provenance = i % 2 ? features::Provenance::Simulated : features::Provenance::Measured;
        for (int j = 0; j < 8; ++j) sample.features.push_back(stream.normal());
        samples.push_back(sample);
    }
    const auto path = std::filesystem::temp_directory_path() / "demads_dataset.csv";
    features::write_dataset_csv(path, samples, {"p_total", "q_total"});
    const auto loaded = features::read_dataset_csv(path);
    REQUIRE(loaded.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].day == samples[i].day);
        CHECK(loaded[i].label == samples[i].label);
        CHECK(loaded[i].provenance == samples[i].provenance);
        CHECK(loaded[i].features == samples[i].features);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".meta.json");
}

// ---- metrics -------------------------------------------------------------

TEST_CASE("confusion: diagonal for perfect predictions, row sums are support") {
    using eval::confusion;
    const std::vector<Label> labels{Label::Correct, Label::Wrong, Label::Inverted};
    const std::vector<Label> truths{Label::Correct, Label::Wrong, Label::Inverted, Label::Wrong};
    const auto perfect = confusion(truths, truths, labels);
    CHECK(perfect.at(0, 0) == 1);
    CHECK(perfect.at(1, 1) == 2);
    CHECK(perfect.at(2, 2) == 1);
    CHECK(perfect.total() == 4);

    const std::vector<Label> all_correct(truths.size(), Label::Correct);
    const auto skewed = confusion(all_correct, truths, labels);
    for (size_t i = 0; i < 3; ++i) {
        size_t row_sum = 0;
        for (size_t j = 0; j < 3; ++j) {
            row_sum += skewed.at(i, j);
            if (j != 0) CHECK(skewed.at(i, j) == 0); // single nonzero column
        }
        const size_t support =
            static_cast<size_t>(std::count(truths.begin(), truths.end(), labels[i]));
        CHECK(row_sum == support);
    }
}

TEST_CASE("confusion: errors") {
    const std::vector<Label> labels{Label::Correct, Label::Wrong};
    CHECK_THROWS_AS(eval::confusion({Label::Correct}, {}, labels), Error);
    CHECK_THROWS_AS(eval::confusion({Label::Inverted}, {Label::Inverted}, labels), Error);
}

TEST_CASE("f_score: formula arithmetic and degenerate flags") {
    const std::vector<Label> labels{Label::Correct, Label::Wrong};
    // truth: 2 wrong, 2 correct; predictions catch both wrongs but also
    // flag both corrects -> precision 0.5, recall 1
    const std::vector<Label> truths{Label::Wrong, Label::Wrong, Label::Correct, Label::Correct};
    const std::vector<Label> preds{Label::Wrong, Label::Wrong, Label::Wrong, Label::Wrong};
    const auto matrix = eval::confusion(preds, truths, labels);
    const auto m = eval::f_score(matrix, Label::Wrong);
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 1.0);
    CHECK(m.f == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    const auto perfect = eval::confusion(truths, truths, labels);
    const auto pm = eval::f_score(perfect, Label::Wrong);
    CHECK(pm.precision == 1.0);
    CHECK(pm.recall == 1.0);
    CHECK(pm.f == 1.0);
    CHECK(!pm.degenerate);

    // class absent from truth and predictions
    const std::vector<Label> three{Label::Correct, Label::Wrong, Label::Inverted};
    const auto absent = eval::confusion(preds, truths, three);
    const auto am = eval::f_score(absent, Label::Inverted);
    CHECK(am.f == 0.0);
    CHECK(am.degenerate);
}

TEST_CASE("f_score: harmonic-mean bounds") {
    rng::Stream stream(8);
    const std::vector<Label> labels{Label::Correct, Label::Wrong};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Label> truths, preds;
        for (int i = 0; i < 40; ++i) {
            truths.push_back(stream.below(2) ? Label::Wrong : Label::Correct);
            preds.push_back(stream.below(2) ? Label::Wrong : Label::Correct);
        }
        const auto matrix = eval::confusion(preds, truths, labels);
        for (Label cls : labels) {
            const auto m = eval::f_score(matrix, cls);
            if (m.precision > 0.0 && m.recall > 0.0) {
                CHECK(m.f <= std::max(m.precision, m.recall) + 1e-12);
                CHECK(m.f >= std::min(m.precision, m.recall) - 1e-12);
            }
        }
    }
}
