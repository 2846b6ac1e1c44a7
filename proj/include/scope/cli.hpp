#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scope/metrics.hpp"

namespace scope::cli {

/// Process exit codes; stable for scripting.
enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kAbortedRun = 3,
    kPartialSweep = 4,
};

/// Writes labeled.csv, unlabeled.csv, test.csv and dataset.json to out_dir.
int cmd_gen_data(const nlohmann::json& config_doc, const std::filesystem::path& out_dir);

/// Executes one run and writes report.json and series.csv (plus
/// records_iter_<t>.csv when scope.dump_records is set) to out_dir.
int cmd_run(const nlohmann::json& config_doc, const std::filesystem::path& out_dir);

struct SweepCell {
    std::string value;  // raw value as given on the command line
    std::uint64_t seed = 0;
    std::filesystem::path dir;
    bool ok = false;
    std::string error;
    RunReport report;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    SweepSummary summary;
};

/// Runs values x seeds cells with at most `jobs` concurrent runs. Cell seeds
/// are base_seed + seed index, so adding seeds never changes existing cells.
/// Throws ConfigError if the key is unknown, the value list is empty or any
/// cell config is invalid.
SweepResult run_sweep(const nlohmann::json& config_doc, const std::string& key, const std::vector<std::string>& values,
                      std::size_t n_seeds, std::size_t jobs, const std::filesystem::path& out_dir);

int cmd_sweep(const nlohmann::json& config_doc, const std::string& key, const std::vector<std::string>& values,
              std::size_t n_seeds, std::size_t jobs, const std::filesystem::path& out_dir);

/// Summarises report.json files found under `inputs` (files or directories,
/// searched recursively). With a group key, also writes sweep.csv/sweep.json
/// into out_dir.
int cmd_report(const std::vector<std::filesystem::path>& inputs, const std::string& group_key,
               const std::filesystem::path& out_dir);

/// Entry point for the `scope` executable.
int main(int argc, char** argv);

}  // namespace scope::cli
