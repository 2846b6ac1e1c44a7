#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scope/cli.hpp"
#include "scope/config.hpp"
#include "scope/error.hpp"

using namespace scope;
namespace fs = std::filesystem;

namespace {

struct CapturedRun {
    int code = 0;
    std::string err;
};

CapturedRun invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "scope");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream err, out;
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    const int code = cli::main(static_cast<int>(argv.size()), argv.data());
    std::cerr.rdbuf(old_err);
    std::cout.rdbuf(old_out);
    return {code, err.str()};
}

nlohmann::json tiny_doc() {
    return {{"seed", 3},
            {"dataset", {{"generator", "gaussian_mixture"}, {"n_per_class", 30}, {"classes", 2}, {"dim", 3},
                         {"n_labeled", 6}, {"n_test", 20}, {"outlier_fraction", 0.1}}},
            {"backbone", {{"hidden", {8}}, {"warmup_epochs", 5}, {"epochs_per_iteration", 2}}},
            {"scope", {{"em_iterations", 2}, {"k", 1}}}};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("scope_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& doc) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << doc.dump(2);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::size_t data_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n - 1;
}

}  // namespace

TEST_CASE("gen-data writes the split and its metadata") {
    const fs::path dir = fresh_dir("gen");
    const auto cfg = write_config(dir, tiny_doc());
    REQUIRE(invoke({"gen-data", "-c", cfg.string(), "-o", (dir / "a").string()}).code == cli::kOk);
    CHECK(data_rows(dir / "a" / "labeled.csv") == 6);
    CHECK(data_rows(dir / "a" / "test.csv") == 20);
    CHECK(data_rows(dir / "a" / "unlabeled.csv") == 60 - 6 - 20);
    std::ifstream meta(dir / "a" / "dataset.json");
    CHECK(nlohmann::json::parse(meta)["C"] == 2);

    REQUIRE(invoke({"gen-data", "-c", cfg.string(), "-o", (dir / "b").string()}).code == cli::kOk);
    for (const char* f : {"labeled.csv", "unlabeled.csv", "test.csv", "dataset.json"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    fs::remove_all(dir);
}

TEST_CASE("config errors exit with code 2 and name the field") {
    const fs::path dir = fresh_dir("missing");
    auto doc = tiny_doc();
    doc["dataset"].erase("generator");
    auto res = invoke({"gen-data", "-c", write_config(dir, doc).string(), "-o", dir.string()});
    CHECK(res.code == cli::kConfigError);
    CHECK(res.err.find("dataset.generator") != std::string::npos);

    doc = tiny_doc();
    doc["scope"].erase("k");
    res = invoke({"run", "-c", write_config(dir, doc).string(), "-o", dir.string()});
    CHECK(res.code == cli::kConfigError);
    CHECK(res.err.find("scope.k") != std::string::npos);

    doc = tiny_doc();
    doc["scope"]["unknown_knob"] = 1;
    res = invoke({"run", "-c", write_config(dir, doc).string(), "-o", dir.string()});
    CHECK(res.code == cli::kConfigError);
    CHECK(res.err.find("scope.unknown_knob") != std::string::npos);

    CHECK(invoke({"run", "-c", (dir / "absent.json").string()}).code == cli::kConfigError);
    fs::remove_all(dir);
}

TEST_CASE("run writes deterministic artifacts") {
    const fs::path dir = fresh_dir("run");
    auto doc = tiny_doc();
    doc["scope"]["dump_records"] = true;
    const auto cfg = write_config(dir, doc);
    REQUIRE(invoke({"run", "-c", cfg.string(), "-o", (dir / "a").string()}).code == cli::kOk);
    REQUIRE(invoke({"run", "-c", cfg.string(), "-o", (dir / "b").string()}).code == cli::kOk);
    CHECK(slurp(dir / "a" / "series.csv") == slurp(dir / "b" / "series.csv"));
    CHECK(data_rows(dir / "a" / "series.csv") == 3);
    CHECK(fs::exists(dir / "a" / "records_iter_1.csv"));
    CHECK(fs::exists(dir / "a" / "records_iter_2.csv"));

    std::ifstream in(dir / "a" / "report.json");
    const auto report = nlohmann::json::parse(in);
    CHECK(config_from_json(report["config"]) == config_from_json(doc));

    REQUIRE(invoke({"run", "-c", cfg.string(), "-o", (dir / "c").string(), "--scope.em_iterations=0"}).code == cli::kOk);
    CHECK(data_rows(dir / "c" / "series.csv") == 1);
    fs::remove_all(dir);
}

TEST_CASE("the default benchmark config runs in under a minute") {
    const fs::path dir = fresh_dir("bench");
    const nlohmann::json doc = {{"seed", 1},
                                {"dataset", {{"generator", "gaussian_mixture"}, {"outlier_fraction", 0.1}}},
                                {"scope", {{"k", 3}}}};
    const auto cfg = write_config(dir, doc);
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(invoke({"run", "-c", cfg.string(), "-o", dir.string()}).code == cli::kOk);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(60));
    CHECK(data_rows(dir / "series.csv") == 11);
    fs::remove_all(dir);
}

TEST_CASE("sweep") {
    const fs::path dir = fresh_dir("sweep");
    const auto cfg = write_config(dir, tiny_doc());

    SUBCASE("k over six values and two seeds") {
        const auto res = cli::run_sweep(tiny_doc(), "k", {"1", "2", "3", "4", "5", "6"}, 2, 2, dir);
        CHECK(res.cells.size() == 12);
        CHECK(res.summary.rows.size() == 6);
        CHECK(data_rows(dir / "sweep.csv") == 6);
        for (const auto& c : res.cells) CHECK(c.ok);
    }
    SUBCASE("adding seeds leaves existing cells unchanged") {
        const auto one = cli::run_sweep(tiny_doc(), "filter_mode", {"gaussian"}, 1, 1, dir / "one");
        const auto two = cli::run_sweep(tiny_doc(), "filter_mode", {"gaussian"}, 2, 1, dir / "two");
        auto strip = [](RunReport r) {
            r.runtime_s = 0;
            return r;
        };
        CHECK(strip(one.cells[0].report) == strip(two.cells[0].report));
        CHECK(two.cells[1].seed == two.cells[0].seed + 1);
    }
    SUBCASE("empty value list and unknown key") {
        CHECK(cli::cmd_sweep(tiny_doc(), "k", {}, 1, 1, dir) == cli::kConfigError);
        CHECK(cli::cmd_sweep(tiny_doc(), "scope.nope", {"1"}, 1, 1, dir) == cli::kConfigError);
        CHECK(invoke({"sweep", "-c", cfg.string(), "--key", "k", "--values", ""}).code == cli::kConfigError);
    }
    SUBCASE("report aggregates what a sweep wrote") {
        REQUIRE(invoke({"sweep", "-c", cfg.string(), "-o", (dir / "s").string(), "--key", "filter_mode", "--values",
                        "gaussian,knn,both", "--seeds", "2"})
                    .code == cli::kOk);
        REQUIRE(invoke({"report", (dir / "s" / "cells").string(), "--group-key", "filter_mode", "-o",
                        (dir / "r").string()})
                    .code == cli::kOk);
        CHECK(data_rows(dir / "r" / "sweep.csv") == 3);
    }
    fs::remove_all(dir);
}

TEST_CASE("config documents round trip field for field") {
    RunConfig c;
    c.seed = 17;
    c.dataset.generator = "two_moons";
    c.scope.filter_mode = FilterMode::kGaussian;
    c.scope.manifold = Manifold::kProbabilities;
    c.backbone.hidden = {32};
    CHECK(config_from_json(to_json(c)) == c);

    nlohmann::json doc = tiny_doc();
    apply_override(doc, "scope.filter_mode", "knn");
    apply_override(doc, "scope.gamma", "0.5");
    const RunConfig o = config_from_json(doc);
    CHECK(o.scope.filter_mode == FilterMode::kKnn);
    CHECK(o.scope.gamma == 0.5);

    doc["dataset"]["n_labeled"] = -1;
    CHECK_THROWS_AS(config_from_json(doc), ConfigError);
}
