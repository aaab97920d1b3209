#include "demads/features.hpp"

#include <algorithm>
#include <cmath>

#include "demads/error.hpp"
#include "demads/io.hpp"

namespace demads::features {

const char* label_name(Label label) {
    switch (label) {
    case Label::Correct: return "Correct";
    case Label::Wrong: return "Wrong";
    case Label::Inverted: return "Inverted";
    case Label::Abnormal: return "Abnormal";
    }
    return "Correct";
}

Label label_from_name(const std::string& name) {
    if (name == "Correct") return Label::Correct;
    if (name == "Wrong") return Label::Wrong;
    if (name == "Inverted") return Label::Inverted;
    if (name == "Abnormal") return Label::Abnormal;
    throw Error(ErrKind::UnknownLabel, "unknown label '" + name + "'");
}

const char* provenance_name(Provenance p) {
    return p == Provenance::Measured ? "Measured" : "Simulated";
}

Provenance provenance_from_name(const std::string& name) {
    if (name == "Measured") return Provenance::Measured;
    if (name == "Simulated") return Provenance::Simulated;
    throw Error(ErrKind::UnknownLabel, "unknown provenance '" + name + "'");
}

namespace {

double percentile_sorted(const std::vector<double>& sorted, double p) {
    // linear interpolation on the (n-1)-spaced rank scale
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(rank);
    const double frac = rank - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

} // namespace

std::vector<double> condense_day(const Tensor& day_matrix) {
    const size_t steps = day_matrix.rows();
    const size_t channels = day_matrix.cols();
    if (steps < 2 || channels == 0)
        throw Error(ErrKind::EmptyDay, "day matrix needs >= 2 timesteps");
    for (double v : day_matrix.data)
        if (!std::isfinite(v))
            throw Error(ErrKind::NonFiniteInput, "day matrix has NaN/Inf");

    std::vector<double> features;
    features.reserve(channels * kFeaturesPerChannel);
    std::vector<double> column(steps);
    for (size_t c = 0; c < channels; ++c) {
        for (size_t t = 0; t < steps; ++t) column[t] = day_matrix(t, c);

        double mean = 0.0;
        for (double v : column) mean += v;
        mean /= static_cast<double>(steps);
        double var = 0.0;
        for (double v : column) var += (v - mean) * (v - mean);
        var /= static_cast<double>(steps);

        std::vector<double> sorted = column;
        std::sort(sorted.begin(), sorted.end());

        features.push_back(mean);
        features.push_back(std::sqrt(var));
        features.push_back(sorted.front());
        features.push_back(sorted.back());
        features.push_back(percentile_sorted(sorted, 25.0));
        features.push_back(percentile_sorted(sorted, 50.0));
        features.push_back(percentile_sorted(sorted, 75.0));

        double hour_sum[24] = {0.0};
        size_t hour_count[24] = {0};
        for (size_t t = 0; t < steps; ++t) {
            const size_t hour = t * 24 / steps;
            hour_sum[hour] += column[t];
            hour_count[hour] += 1;
        }
        for (int h = 0; h < 24; ++h)
            features.push_back(hour_count[h] ? hour_sum[h] / static_cast<double>(hour_count[h])
                                             : mean);
    }
    return features;
}

Standardizer fit_standardizer(const std::vector<std::vector<double>>& rows) {
    if (rows.size() < 2)
        throw Error(ErrKind::TooFewSamples, "standardizer needs >= 2 samples");
    const size_t dim = rows.front().size();
    for (const auto& row : rows)
        if (row.size() != dim)
            throw Error(ErrKind::LengthMismatch, "feature rows have differing lengths");

    Standardizer s;
    s.mean.assign(dim, 0.0);
    s.std_dev.assign(dim, 0.0);
    const double n = static_cast<double>(rows.size());
    for (const auto& row : rows)
        for (size_t i = 0; i < dim; ++i) s.mean[i] += row[i];
    for (auto& m : s.mean) m /= n;
    for (const auto& row : rows)
        for (size_t i = 0; i < dim; ++i) {
            const double d = row[i] - s.mean[i];
            s.std_dev[i] += d * d;
        }
    for (auto& v : s.std_dev) {
        v = std::sqrt(v / n);
        if (v < 1e-12) v = 1.0; // zero-variance guard: feature maps to 0
    }
    return s;
}

Standardizer fit_standardizer(const std::vector<DailySample>& samples) {
    std::vector<std::vector<double>> rows;
    rows.reserve(samples.size());
    for (const auto& sample : samples) rows.push_back(sample.features);
    return fit_standardizer(rows);
}

std::vector<double> apply(const Standardizer& s, std::span<const double> x) {
    if (x.size() != s.mean.size())
        throw Error(ErrKind::LengthMismatch, "standardizer dimension mismatch");
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - s.mean[i]) / s.std_dev[i];
    return out;
}

std::vector<double> invert(const Standardizer& s, std::span<const double> x) {
    if (x.size() != s.mean.size())
        throw Error(ErrKind::LengthMismatch, "standardizer dimension mismatch");
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] * s.std_dev[i] + s.mean[i];
    return out;
}

nlohmann::json standardizer_to_json(const Standardizer& s) {
    return {{"mean", s.mean}, {"std", s.std_dev}};
}

Standardizer standardizer_from_json(const nlohmann::json& j) {
    Standardizer s;
    try {
        s.mean = j.at("mean").get<std::vector<double>>();
        s.std_dev = j.at("std").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrKind::ParseError, std::string("standardizer json: ") + e.what());
    }
    if (s.mean.size() != s.std_dev.size())
        throw Error(ErrKind::ParseError, "standardizer mean/std lengths differ");
    return s;
}

void write_dataset_csv(const std::filesystem::path& path, const std::vector<DailySample>& samples,
                       const std::vector<std::string>& channel_names) {
    if (samples.empty())
        throw Error(ErrKind::TooFewSamples, "refusing to write an empty dataset");
    const size_t dim = samples.front().features.size();
    std::string out = "day,provenance,label";
    for (size_t i = 0; i < dim; ++i) out += ",f" + std::to_string(i);
    out += '\n';
    for (const auto& sample : samples) {
        if (sample.features.size() != dim)
            throw Error(ErrKind::LengthMismatch, "dataset rows have differing feature lengths");
        out += std::to_string(sample.day);
        out += ',';
        out += provenance_name(sample.provenance);
        out += ',';
        out += label_name(sample.label);
        for (double v : sample.features) {
            out += ',';
            out += io::format_double(v);
        }
        out += '\n';
    }
    io::write_text_file(path, out);

    nlohmann::json sidecar;
    sidecar["channel_names"] = channel_names;
    sidecar["features_per_channel"] = kFeaturesPerChannel;
    sidecar["feature_order"] = "mean,std,min,max,q25,q50,q75,hourly_means[24]";
    sidecar["feature_count"] = dim;
    std::filesystem::path sidecar_path = path;
    sidecar_path += ".meta.json";
    io::write_json_file(sidecar_path, sidecar);
}

std::vector<DailySample> read_dataset_csv(const std::filesystem::path& path) {
    const std::string text = io::read_text_file(path);
    std::vector<DailySample> samples;
    size_t pos = 0;
    bool first = true;
    size_t dim = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        size_t cpos = 0;
        while (true) {
            const size_t comma = line.find(',', cpos);
            if (comma == std::string::npos) {
                cells.push_back(line.substr(cpos));
                break;
            }
            cells.push_back(line.substr(cpos, comma - cpos));
            cpos = comma + 1;
        }
        if (first) {
            if (cells.size() < 4 || cells[0] != "day")
                throw Error(ErrKind::ParseError, "unexpected dataset header in " + path.string());
            dim = cells.size() - 3;
            first = false;
            continue;
        }
        if (cells.size() != dim + 3)
            throw Error(ErrKind::ParseError, "ragged dataset row in " + path.string());
        DailySample sample;
        sample.day = std::stoi(cells[0]);
        sample.provenance = provenance_from_name(cells[1]);
        sample.label = label_from_name(cells[2]);
        sample.features.reserve(dim);
        for (size_t i = 0; i < dim; ++i) sample.features.push_back(std::stod(cells[3 + i]));
        samples.push_back(std::move(sample));
    }
    if (samples.empty())
        throw Error(ErrKind::ParseError, "dataset csv has no rows: " + path.string());
    return samples;
}

} // namespace demads::features
