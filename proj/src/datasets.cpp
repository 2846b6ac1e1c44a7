#include "scope/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "scope/error.hpp"
#include "scope/rng.hpp"

namespace scope {

Matrix Dataset::features() const {
    Matrix m(static_cast<Eigen::Index>(samples.size()), dim);
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (int j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), j) = samples[i].features[j];
    return m;
}

Matrix Dataset::features(const std::vector<std::size_t>& rows) const {
    Matrix m(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), j) = samples[rows[i]].features[j];
    return m;
}

std::vector<int> Dataset::truths() const {
    std::vector<int> t;
    t.reserve(samples.size());
    for (const auto& s : samples) t.push_back(s.hidden_truth);
    return t;
}

std::size_t Dataset::count_outliers() const {
    return static_cast<std::size_t>(std::count_if(
        samples.begin(), samples.end(), [](const Sample& s) { return s.is_injected_outlier; }));
}

std::vector<double> feature_sd(const Dataset& dataset) {
    std::vector<double> sd(static_cast<std::size_t>(dataset.dim), 0.0);
    if (dataset.empty()) return sd;
    const double n = static_cast<double>(dataset.size());
    for (int j = 0; j < dataset.dim; ++j) {
        double mean = 0.0;
        for (const auto& s : dataset.samples) mean += s.features[j];
        mean /= n;
        double var = 0.0;
        for (const auto& s : dataset.samples) var += (s.features[j] - mean) * (s.features[j] - mean);
        sd[static_cast<std::size_t>(j)] = std::sqrt(var / n);
    }
    return sd;
}

double feature_scale(const Dataset& dataset) {
    const auto sd = feature_sd(dataset);
    if (sd.empty()) return 0.0;
    double sq = 0.0;
    for (double s : sd) sq += s * s;
    return std::sqrt(sq / static_cast<double>(sd.size()));
}

Matrix gaussian_mixture_means(int num_classes, int dim, double class_separation) {
    Matrix means = Matrix::Zero(num_classes, dim);
    if (num_classes <= dim) {
        for (int c = 0; c < num_classes; ++c) means(c, c) = class_separation;
        const Eigen::RowVectorXd centroid = means.colwise().mean();
        means.rowwise() -= centroid;
    } else {
        for (int c = 0; c < num_classes; ++c) {
            const double angle = 2.0 * std::numbers::pi * c / num_classes;
            means(c, 0) = class_separation * std::cos(angle);
            means(c, 1) = class_separation * std::sin(angle);
        }
    }
    return means;
}

Dataset gen_gaussian_mixture(std::size_t n_per_class, int num_classes, int dim,
                             double class_separation, double cov_scale, std::uint64_t seed) {
    if (num_classes < 2) throw InvalidInput("gaussian mixture needs at least 2 classes");
    if (dim < 2) throw InvalidInput("gaussian mixture needs at least 2 dimensions");
    if (!(class_separation > 0.0)) throw InvalidInput("class_separation must be positive");
    if (!(cov_scale >= 0.0)) throw InvalidInput("cov_scale must be non-negative");

    const Matrix means = gaussian_mixture_means(num_classes, dim, class_separation);
    Rng rng(seed, Stream::kData);
    Dataset d{num_classes, dim, {}};
    d.samples.reserve(n_per_class * static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            Sample s;
            s.features.resize(static_cast<std::size_t>(dim));
            for (int j = 0; j < dim; ++j)
                s.features[static_cast<std::size_t>(j)] = means(c, j) + cov_scale * rng.normal();
            s.visible_label = c;
            s.hidden_truth = c;
            d.samples.push_back(std::move(s));
        }
    }
    return d;
}

Dataset gen_two_moons(std::size_t n, double noise_sd, std::uint64_t seed) {
    if (n % 2 != 0) throw InvalidInput("two moons needs an even sample count");
    if (!(noise_sd >= 0.0)) throw InvalidInput("noise_sd must be non-negative");
    Rng rng(seed, Stream::kData);
    Dataset d{2, 2, {}};
    const std::size_t half = n / 2;
    const double denom = half > 1 ? static_cast<double>(half - 1) : 1.0;
    for (int moon = 0; moon < 2; ++moon) {
        for (std::size_t i = 0; i < half; ++i) {
            const double t = std::numbers::pi * static_cast<double>(i) / denom;
            double x = std::cos(t);
            double y = std::sin(t);
            if (moon == 1) {
                x = 1.0 - x;
                y = 0.5 - y;
            }
            Sample s;
            s.features = {x + noise_sd * rng.normal(), y + noise_sd * rng.normal()};
            s.visible_label = moon;
            s.hidden_truth = moon;
            d.samples.push_back(std::move(s));
        }
    }
    return d;
}

Dataset inject_outliers(const Dataset& dataset, double fraction, double displacement_scale,
                        std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 0.5)) throw InvalidInput("outlier fraction must lie in [0, 0.5]");
    if (fraction == 0.0) return dataset;
    const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dataset.size())));
    if (count < 1) throw InvalidInput("outlier fraction selects no samples");

    const auto sd = feature_sd(dataset);
    Rng rng(seed, Stream::kOutliers);
    Dataset out = dataset;
    for (std::size_t idx : rng.sample_indices(dataset.size(), count)) {
        std::vector<double> dir(static_cast<std::size_t>(dataset.dim));
        double norm = 0.0;
        while (norm == 0.0) {
            norm = 0.0;
            for (double& v : dir) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
        }
        auto& s = out.samples[idx];
        for (std::size_t j = 0; j < dir.size(); ++j)
            s.features[j] += displacement_scale * sd[j] * dir[j] / norm;
        s.is_injected_outlier = true;
    }
    return out;
}

Split split(const Dataset& dataset, const SplitSpec& spec) {
    const std::size_t n = dataset.size();
    if (spec.n_labeled + spec.n_test > n)
        throw SplitError("n_labeled + n_test exceeds dataset size " + std::to_string(n));

    Rng rng(spec.seed, Stream::kSplit);
    std::vector<char> role(n, 'u');  // 'l'abeled, 't'est, 'u'nlabeled

    if (spec.stratified) {
        const auto classes = static_cast<std::size_t>(dataset.num_classes);
        if (spec.n_labeled < classes)
            throw SplitError("stratified split needs at least one label per class");
        std::vector<std::vector<std::size_t>> by_class(classes);
        for (std::size_t i = 0; i < n; ++i)
            by_class[static_cast<std::size_t>(dataset.samples[i].hidden_truth)].push_back(i);
        for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t want = spec.n_labeled / classes + (c < spec.n_labeled % classes ? 1 : 0);
            if (by_class[c].size() < want)
                throw SplitError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                                 " samples, stratified split needs " + std::to_string(want));
            for (std::size_t k : rng.sample_indices(by_class[c].size(), want)) role[by_class[c][k]] = 'l';
        }
    } else {
        for (std::size_t k : rng.sample_indices(n, spec.n_labeled)) role[k] = 'l';
    }

    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i)
        if (role[i] != 'l') rest.push_back(i);
    for (std::size_t k : rng.sample_indices(rest.size(), spec.n_test)) role[rest[k]] = 't';

    Split out;
    for (Dataset* d : {&out.labeled, &out.unlabeled, &out.test}) {
        d->num_classes = dataset.num_classes;
        d->dim = dataset.dim;
    }
    for (std::size_t i = 0; i < n; ++i) {
        Sample s = dataset.samples[i];
        switch (role[i]) {
            case 'l':
                s.visible_label = s.hidden_truth;
                out.labeled.samples.push_back(std::move(s));
                break;
            case 't':
                out.test.samples.push_back(std::move(s));
                break;
            default:
                s.visible_label.reset();
                out.unlabeled.samples.push_back(std::move(s));
        }
    }
    return out;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    for (int j = 0; j < dataset.dim; ++j) out << 'f' << j << ',';
    out << "visible_label,hidden_truth,is_outlier\n";
    char buf[32];
    for (const auto& s : dataset.samples) {
        for (double v : s.features) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        if (s.visible_label) out << *s.visible_label;
        out << ',' << s.hidden_truth << ',' << (s.is_injected_outlier ? 1 : 0) << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if constexpr (std::is_floating_point_v<T>) {
        // from_chars rejects a leading '+'; nothing we write produces one.
        auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::general);
        return ec == std::errc() && ptr == last && std::isfinite(value);
    } else {
        auto [ptr, ec] = std::from_chars(first, last, value);
        return ec == std::errc() && ptr == last;
    }
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::optional<int> num_classes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_fields(line);
    if (header.size() < 3 || header[header.size() - 3] != "visible_label" ||
        header[header.size() - 2] != "hidden_truth" || header.back() != "is_outlier")
        throw ParseError(path.string() + ": header must end with visible_label,hidden_truth,is_outlier", 1);
    Dataset d;
    d.dim = static_cast<int>(header.size() - 3);
    for (int j = 0; j < d.dim; ++j)
        if (header[static_cast<std::size_t>(j)] != "f" + std::to_string(j))
            throw ParseError(path.string() + ": feature column " + std::to_string(j) + " must be named f" +
                                 std::to_string(j),
                             1);

    int max_class = -1;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto bad = [&](const std::string& why) {
            return ParseError(path.string() + ":" + std::to_string(line_no) + ": " + why, line_no);
        };
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw bad("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        Sample s;
        s.features.resize(static_cast<std::size_t>(d.dim));
        for (int j = 0; j < d.dim; ++j)
            if (!parse_number(fields[static_cast<std::size_t>(j)], s.features[static_cast<std::size_t>(j)]))
                throw bad("feature f" + std::to_string(j) + " is not a finite number");
        const auto k = static_cast<std::size_t>(d.dim);
        if (!fields[k].empty()) {
            int v = 0;
            if (!parse_number(fields[k], v) || v < 0) throw bad("bad visible_label");
            s.visible_label = v;
        }
        if (!parse_number(fields[k + 1], s.hidden_truth) || s.hidden_truth < 0) throw bad("bad hidden_truth");
        if (fields[k + 2] == "1")
            s.is_injected_outlier = true;
        else if (fields[k + 2] != "0")
            throw bad("is_outlier must be 0 or 1");
        if (s.visible_label && *s.visible_label != s.hidden_truth)
            throw bad("visible_label disagrees with hidden_truth");
        max_class = std::max(max_class, s.hidden_truth);
        d.samples.push_back(std::move(s));
    }
    d.num_classes = num_classes.value_or(max_class + 1);
    if (max_class >= d.num_classes)
        throw ParseError(path.string() + ": class id " + std::to_string(max_class) + " exceeds class count");
    return d;
}

nlohmann::json dataset_metadata(const Dataset& dataset, std::uint64_t seed, const std::string& generator,
                                const nlohmann::json& params) {
    return {{"n", dataset.size()},   {"D", dataset.dim},         {"C", dataset.num_classes},
            {"seed", seed},          {"generator", generator},   {"params", params}};
}

}  // namespace scope
