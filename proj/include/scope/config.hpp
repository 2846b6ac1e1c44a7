#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace scope {

enum class FilterMode { kNone, kGaussian, kKnn, kBoth };
enum class Manifold { kPenultimate, kProbabilities };

std::string to_string(FilterMode mode);
std::string to_string(Manifold manifold);
bool uses_gaussian(FilterMode mode);
bool uses_knn(FilterMode mode);

struct DatasetConfig {
    /// "gaussian_mixture", "two_moons" or "csv" (a directory holding
    /// labeled.csv, unlabeled.csv and test.csv as written by gen-data).
    std::string generator = "gaussian_mixture";
    std::size_t n_per_class = 150;
    int classes = 4;
    int dim = 8;
    double class_separation = 4.0;
    double cov_scale = 1.0;
    std::size_t n = 400;  // two_moons
    double noise_sd = 0.1;
    std::string path;  // csv
    double outlier_fraction = 0.0;
    double outlier_scale = 5.0;
    std::size_t n_labeled = 20;
    std::size_t n_test = 200;
    bool stratified = true;

    bool operator==(const DatasetConfig&) const = default;
};

struct BackboneConfig {
    std::vector<int> hidden{64, 64};
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    int warmup_epochs = 50;
    int epochs_per_iteration = 30;

    bool operator==(const BackboneConfig&) const = default;
};

/// Augmentation strengths relative to the training data's feature scale.
struct AugmentConfig {
    double weak_jitter = 0.02;
    double strong_jitter = 0.15;
    double strong_dropout = 0.25;

    bool operator==(const AugmentConfig&) const = default;
};

struct ScopeConfig {
    double confidence_threshold = 0.95;
    double lambda_u = 1.0;
    int em_iterations = 10;
    FilterMode filter_mode = FilterMode::kBoth;
    double gamma = 0.8;
    int k = 0;  // required when the kNN filter is enabled
    int refinement_rounds = 3;
    Manifold manifold = Manifold::kPenultimate;
    /// Return promoted samples to the unlabeled pool at every iteration.
    bool repseudolabel = false;
    /// Test-harness mode: the ground truth replaces the filters, so exactly the
    /// correct confident pseudolabels are accepted.
    bool oracle_filter = false;
    /// Write records_iter_<t>.csv for every EM iteration.
    bool dump_records = false;

    bool operator==(const ScopeConfig&) const = default;
};

struct RunConfig {
    DatasetConfig dataset;
    BackboneConfig backbone;
    AugmentConfig augment;
    ScopeConfig scope;
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    bool operator==(const RunConfig&) const = default;
};

/// Parses and validates a config document. Unknown keys and out-of-range
/// values raise ConfigError naming the dotted field path. `dataset.generator`
/// and `seed` are required, as is `scope.k` when the kNN filter is enabled.
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& config);

/// Throws ConfigError on the first invalid field.
void validate(const RunConfig& config);

/// Reads a JSON config file. Throws ConfigError on I/O or syntax errors.
nlohmann::json load_config_document(const std::string& path);

/// Sets `dotted_path` (e.g. "scope.k") in the document. The value is parsed
/// as JSON when possible and taken as a plain string otherwise.
void apply_override(nlohmann::json& doc, const std::string& dotted_path, const std::string& value);

}  // namespace scope
