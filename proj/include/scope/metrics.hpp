#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace scope {

double accuracy(std::span<const int> predictions, std::span<const int> truth);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Interval&) const = default;
};

/// Normal-approximation binomial interval p +- z sqrt(p(1-p)/n), clamped to [0, 1].
Interval binomial_interval(double p_hat, std::size_t n, double z = 1.96);

struct IterationMetrics {
    int t = 0;  // 0 is the warm-up row
    double accuracy = 0.0;
    double confounding_rate = 0.0;
    std::size_t n_promoted = 0;
    bool operator==(const IterationMetrics&) const = default;
};

struct RunReport {
    nlohmann::json config;
    std::vector<IterationMetrics> iterations;
    double final_accuracy = 0.0;
    Interval final_ci;
    std::uint64_t seed = 0;
    double runtime_s = 0.0;

    /// Mean confounding rate over the EM iterations (t >= 1); 0 without any.
    double mean_confounding_rate() const;
    bool operator==(const RunReport&) const = default;
};

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

struct SweepRow {
    std::string group;
    std::size_t n_runs = 0;
    double accuracy_mean = 0.0;
    double accuracy_sd = 0.0;
    double confounding_mean = 0.0;
    double confounding_sd = 0.0;
    bool operator==(const SweepRow&) const = default;
};

struct SweepSummary {
    std::string group_key;
    std::vector<SweepRow> rows;
    std::vector<std::string> warnings;
    bool operator==(const SweepSummary&) const = default;
};

/// Config path used to group reports: "k" and "filter_mode" are shorthands for
/// "scope.k" and "scope.filter_mode"; any other dotted path is used verbatim.
std::string resolve_group_path(const std::string& group_key);

/// Value of a dotted config path rendered as a group label (strings
/// unquoted). Throws InvalidInput when the path is absent.
std::string group_label(const nlohmann::json& config, const std::string& dotted_path);

/// Per group: mean and sample sd of final accuracy and of the per-run mean
/// confounding rate. Groups are emitted in `expected_groups` order followed by
/// any others in order of first appearance; expected groups without reports
/// are skipped with a warning.
SweepSummary aggregate_sweep(std::span<const RunReport> reports, const std::string& group_key,
                             const std::vector<std::string>& expected_groups = {});

nlohmann::json to_json(const SweepSummary& summary);
SweepSummary summary_from_json(const nlohmann::json& doc);

/// report.json and series.csv. Returns the written paths.
std::vector<std::filesystem::path> emit(const RunReport& report, const std::filesystem::path& out_dir);
/// sweep.csv and sweep.json. Returns the written paths.
std::vector<std::filesystem::path> emit(const SweepSummary& summary, const std::filesystem::path& out_dir);

/// RFC-4180 field quoting.
std::string csv_field(const std::string& value);
/// Shortest decimal that round-trips.
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace scope
