#include "scope/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "scope/config.hpp"
#include "scope/engine.hpp"
#include "scope/error.hpp"

namespace scope::cli {

namespace fs = std::filesystem;

namespace {

fs::path resolve_out_dir(const RunConfig& config, const fs::path& out_dir) {
    return out_dir.empty() ? fs::path(config.out_dir) : out_dir;
}

bool has_path(const nlohmann::json& doc, const std::string& dotted) {
    try {
        group_label(doc, dotted);
        return true;
    } catch (const InvalidInput&) {
        return false;
    }
}

std::string cell_dir_name(const std::string& key, const std::string& value) {
    std::string name = key + "=" + value;
    for (char& c : name)
        if (c == '/' || c == '\\' || c == ' ' || c == '"') c = '_';
    return name;
}

}  // namespace

int cmd_gen_data(const nlohmann::json& config_doc, const fs::path& out_dir) {
    RunConfig config;
    try {
        config = config_from_json(config_doc);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    const fs::path dir = resolve_out_dir(config, out_dir);
    const PreparedData data = prepare_data(config);
    fs::create_directories(dir);
    save_csv(data.split.labeled, dir / "labeled.csv");
    save_csv(data.split.unlabeled, dir / "unlabeled.csv");
    save_csv(data.split.test, dir / "test.csv");
    write_text_file(dir / "dataset.json", data.metadata.dump(2) + "\n");
    std::cout << "wrote " << data.metadata["n"].get<std::size_t>() << " samples to " << dir.string() << '\n';
    return kOk;
}

int cmd_run(const nlohmann::json& config_doc, const fs::path& out_dir) {
    RunConfig config;
    try {
        config = config_from_json(config_doc);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    const fs::path dir = resolve_out_dir(config, out_dir);
    try {
        const RunOutcome outcome = run(config);
        emit(outcome.report, dir);
        if (config.scope.dump_records)
            for (std::size_t t = 0; t < outcome.records.size(); ++t)
                write_text_file(dir / ("records_iter_" + std::to_string(t + 1) + ".csv"), records_csv(outcome.records[t]));
        std::cout << "final accuracy " << std::fixed << std::setprecision(4) << outcome.report.final_accuracy << " ("
                  << outcome.report.final_ci.lo << ", " << outcome.report.final_ci.hi << "), mean confounding rate "
                  << outcome.report.mean_confounding_rate() << '\n';
    } catch (const AbortedRun& e) {
        std::cerr << "aborted: " << e.what() << " (last good iteration " << e.last_good().t << ")\n";
        return kAbortedRun;
    }
    return kOk;
}

SweepResult run_sweep(const nlohmann::json& config_doc, const std::string& key, const std::vector<std::string>& values,
                      std::size_t n_seeds, std::size_t jobs, const fs::path& out_dir) {
    if (values.empty()) throw ConfigError("--values", "sweep value list is empty");
    if (n_seeds < 1) throw ConfigError("--seeds", "must be at least 1");
    const std::string path = resolve_group_path(key);
    if (!has_path(to_json(RunConfig{}), path)) throw ConfigError(key, "is not a config field");

    const RunConfig base = config_from_json(config_doc);
    const fs::path root = resolve_out_dir(base, out_dir);

    SweepResult result;
    std::vector<RunConfig> configs;
    std::vector<std::string> expected;
    for (const auto& value : values) {
        for (std::size_t s = 0; s < n_seeds; ++s) {
            nlohmann::json doc = config_doc;
            apply_override(doc, path, value);
            doc["seed"] = base.seed + s;
            RunConfig cfg = config_from_json(doc);  // throws ConfigError for a bad cell
            SweepCell cell;
            cell.value = value;
            cell.seed = cfg.seed;
            cell.dir = root / "cells" / cell_dir_name(path, value) / ("seed_" + std::to_string(cfg.seed));
            if (s == 0) expected.push_back(group_label(to_json(cfg), path));
            result.cells.push_back(std::move(cell));
            configs.push_back(std::move(cfg));
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            auto& cell = result.cells[i];
            try {
                cell.report = run(configs[i]).report;
                emit(cell.report, cell.dir);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, configs.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& th : threads) th.join();

    std::vector<RunReport> reports;
    for (const auto& cell : result.cells)
        if (cell.ok) reports.push_back(cell.report);
    result.summary = aggregate_sweep(reports, key, expected);
    for (const auto& cell : result.cells)
        if (!cell.ok)
            result.summary.warnings.push_back("cell " + path + "=" + cell.value + " seed " + std::to_string(cell.seed) +
                                              " failed: " + cell.error);
    emit(result.summary, root);
    return result;
}

int cmd_sweep(const nlohmann::json& config_doc, const std::string& key, const std::vector<std::string>& values,
              std::size_t n_seeds, std::size_t jobs, const fs::path& out_dir) {
    SweepResult result;
    try {
        result = run_sweep(config_doc, key, values, n_seeds, jobs, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    std::cout << std::left << std::setw(16) << key << " runs  accuracy          confounding\n";
    for (const auto& r : result.summary.rows)
        std::cout << std::setw(16) << r.group << ' ' << std::setw(5) << r.n_runs << std::fixed << std::setprecision(4)
                  << r.accuracy_mean << " +- " << r.accuracy_sd << "  " << r.confounding_mean << " +- "
                  << r.confounding_sd << '\n';
    for (const auto& w : result.summary.warnings) std::cerr << "warning: " << w << '\n';
    const bool failed = std::any_of(result.cells.begin(), result.cells.end(), [](const SweepCell& c) { return !c.ok; });
    return failed ? kPartialSweep : kOk;
}

int cmd_report(const std::vector<fs::path>& inputs, const std::string& group_key, const fs::path& out_dir) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_regular_file(in)) {
            files.push_back(in);
        } else if (fs::is_directory(in)) {
            for (const auto& entry : fs::recursive_directory_iterator(in))
                if (entry.is_regular_file() && entry.path().filename() == "report.json") files.push_back(entry.path());
        } else {
            std::cerr << "no such file or directory: " << in.string() << '\n';
            return kConfigError;
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::cerr << "no report.json found\n";
        return kConfigError;
    }
    std::vector<RunReport> reports;
    for (const auto& f : files) {
        std::ifstream in(f);
        try {
            reports.push_back(report_from_json(nlohmann::json::parse(in)));
        } catch (const std::exception& e) {
            std::cerr << f.string() << ": " << e.what() << '\n';
            return kConfigError;
        }
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        std::cout << files[i].string() << ": seed " << r.seed << ", accuracy " << std::fixed << std::setprecision(4)
                  << r.final_accuracy << " (" << r.final_ci.lo << ", " << r.final_ci.hi << "), mean confounding "
                  << r.mean_confounding_rate() << '\n';
    }
    if (!group_key.empty()) {
        SweepSummary summary;
        try {
            summary = aggregate_sweep(reports, group_key);
        } catch (const InvalidInput& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kConfigError;
        }
        emit(summary, out_dir.empty() ? fs::path(".") : out_dir);
    }
    return kOk;
}

int main(int argc, char** argv) {
    // Dotted overrides (--scope.k=6) are pulled out before CLI11 sees them.
    std::vector<std::pair<std::string, std::string>> overrides;
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        const auto eq = a.find('=');
        if (a.rfind("--", 0) == 0 && eq != std::string::npos && a.substr(2, eq - 2).find('.') != std::string::npos) {
            overrides.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
        } else {
            args.push_back(a);
        }
    }

    CLI::App app{"Semi-supervised pseudolabelling with outlier-suppression filters"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON config file")->required();
        sub->add_option("-o,--out-dir", out_dir, "Output directory (default: config out_dir)");
        sub->add_option("--seed", seed, "Override the config seed");
    };

    auto* gen = app.add_subcommand("gen-data", "Generate and split a dataset");
    add_common(gen);
    auto* run_cmd = app.add_subcommand("run", "Execute a single run");
    add_common(run_cmd);

    auto* sweep = app.add_subcommand("sweep", "Run a config field over values x seeds");
    add_common(sweep);
    std::string key;
    std::vector<std::string> values;
    std::size_t n_seeds = 1;
    std::size_t jobs = 1;
    if (const char* env = std::getenv("SCOPE_JOBS")) {
        try {
            jobs = std::max<std::size_t>(1, std::stoul(env));
        } catch (const std::exception&) {
        }
    }
    sweep->add_option("--key", key, "Config field to sweep (k, filter_mode or a dotted path)")->required();
    sweep->add_option("--values", values, "Comma-separated values")->delimiter(',')->required();
    sweep->add_option("--seeds", n_seeds, "Seeds per value (base seed + 0..n-1)");
    sweep->add_option("--jobs", jobs, "Concurrent runs (default: $SCOPE_JOBS or 1)");

    auto* report = app.add_subcommand("report", "Summarise report.json files");
    std::vector<std::string> inputs;
    std::string group_key;
    report->add_option("inputs", inputs, "report.json files or directories")->required();
    report->add_option("--group-key", group_key, "Aggregate into sweep.csv by this field");
    report->add_option("-o,--out-dir", out_dir, "Where sweep.csv goes");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (report->parsed()) {
        std::vector<fs::path> paths(inputs.begin(), inputs.end());
        return cmd_report(paths, group_key, out_dir);
    }

    nlohmann::json doc;
    try {
        doc = load_config_document(config_path);
        for (const auto& [path, value] : overrides) apply_override(doc, path, value);
        if (seed) doc["seed"] = *seed;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(doc, out_dir);
        if (run_cmd->parsed()) return cmd_run(doc, out_dir);
        return cmd_sweep(doc, key, values, n_seeds, jobs, out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace scope::cli
