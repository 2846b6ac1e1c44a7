#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scope/backbone.hpp"

namespace scope {

/// One data point. `hidden_truth` is kept for instrumentation even when the
/// label is withheld; `visible_label`, when present, always equals it.
struct Sample {
    std::vector<double> features;
    std::optional<int> visible_label;
    int hidden_truth = 0;
    bool is_injected_outlier = false;

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    int num_classes = 0;
    int dim = 0;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    /// N x D feature matrix.
    Matrix features() const;
    /// Feature matrix of the given rows.
    Matrix features(const std::vector<std::size_t>& rows) const;
    std::vector<int> truths() const;
    std::size_t count_outliers() const;

    bool operator==(const Dataset&) const = default;
};

/// Per-coordinate population standard deviation.
std::vector<double> feature_sd(const Dataset& dataset);
/// Root-mean-square of the per-coordinate standard deviations.
double feature_scale(const Dataset& dataset);

struct SplitSpec {
    std::size_t n_labeled = 0;
    std::size_t n_test = 0;
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct Split {
    Dataset labeled;
    Dataset unlabeled;
    Dataset test;
};

/// One isotropic Gaussian cluster per class with standard deviation
/// `cov_scale`. Class means are `class_separation` times the standard basis
/// vectors, centred (a regular simplex) when C <= D; otherwise they sit on a
/// circle of radius `class_separation` in the first two coordinates.
Dataset gen_gaussian_mixture(std::size_t n_per_class, int num_classes, int dim,
                             double class_separation, double cov_scale, std::uint64_t seed);

/// Class means used by gen_gaussian_mixture (C x D).
Matrix gaussian_mixture_means(int num_classes, int dim, double class_separation);

/// Two interleaved unit half-circles: the upper one centred at the origin,
/// the lower one centred at (1, 0.5). Angles are evenly spaced along each
/// arc; noise is isotropic Gaussian with sd `noise_sd`.
Dataset gen_two_moons(std::size_t n, double noise_sd, std::uint64_t seed);

/// Displace round(fraction * n) randomly chosen samples by
/// displacement_scale * feature_sd (per coordinate) along a uniformly random
/// direction. Labels and sample count are untouched.
Dataset inject_outliers(const Dataset& dataset, double fraction, double displacement_scale,
                        std::uint64_t seed);

/// Disjoint labeled / unlabeled / test partition. Each subset keeps the
/// original sample order. Unlabeled samples have their visible label cleared.
Split split(const Dataset& dataset, const SplitSpec& spec);

void save_csv(const Dataset& dataset, const std::filesystem::path& path);
/// Throws ParseError carrying the 1-based line number of the first bad row.
/// When `num_classes` is absent it is inferred as max(hidden_truth) + 1.
Dataset load_csv(const std::filesystem::path& path, std::optional<int> num_classes = std::nullopt);

/// Sidecar document {n, D, C, seed, generator, params}.
nlohmann::json dataset_metadata(const Dataset& dataset, std::uint64_t seed,
                                const std::string& generator, const nlohmann::json& params);

}  // namespace scope
