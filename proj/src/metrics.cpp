#include "scope/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "scope/error.hpp"

namespace scope {

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
    if (predictions.size() != truth.size())
        throw InvalidInput("accuracy: predictions and truth differ in length");
    if (predictions.empty()) throw InvalidInput("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

Interval binomial_interval(double p_hat, std::size_t n, double z) {
    if (n < 1) throw InvalidInput("binomial_interval: n must be at least 1");
    if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw InvalidInput("binomial_interval: p_hat must lie in [0, 1]");
    const double half = z * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
    return {std::max(0.0, p_hat - half), std::min(1.0, p_hat + half)};
}

double RunReport::mean_confounding_rate() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& it : iterations) {
        if (it.t < 1) continue;
        sum += it.confounding_rate;
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

nlohmann::json to_json(const RunReport& report) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& it : report.iterations)
        iterations.push_back({{"t", it.t},
                              {"accuracy", it.accuracy},
                              {"confounding_rate", it.confounding_rate},
                              {"n_promoted", it.n_promoted}});
    return {{"config", report.config},
            {"iterations", std::move(iterations)},
            {"final", {{"accuracy", report.final_accuracy}, {"ci", {report.final_ci.lo, report.final_ci.hi}}}},
            {"seed", report.seed},
            {"runtime_s", report.runtime_s}};
}

RunReport report_from_json(const nlohmann::json& doc) {
    try {
        RunReport r;
        r.config = doc.at("config");
        for (const auto& it : doc.at("iterations"))
            r.iterations.push_back({it.at("t").get<int>(), it.at("accuracy").get<double>(),
                                    it.at("confounding_rate").get<double>(), it.at("n_promoted").get<std::size_t>()});
        r.final_accuracy = doc.at("final").at("accuracy").get<double>();
        const auto ci = doc.at("final").at("ci").get<std::vector<double>>();
        if (ci.size() != 2) throw ParseError("final.ci must have two entries");
        r.final_ci = {ci[0], ci[1]};
        r.seed = doc.at("seed").get<std::uint64_t>();
        r.runtime_s = doc.at("runtime_s").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report.json: ") + e.what());
    }
}

std::string resolve_group_path(const std::string& group_key) {
    if (group_key == "k") return "scope.k";
    if (group_key == "filter_mode") return "scope.filter_mode";
    return group_key;
}

std::string group_label(const nlohmann::json& config, const std::string& dotted_path) {
    const nlohmann::json* node = &config;
    std::stringstream parts(dotted_path);
    std::string part;
    while (std::getline(parts, part, '.')) {
        if (!node->is_object() || !node->contains(part))
            throw InvalidInput("config has no field '" + dotted_path + "'");
        node = &(*node)[part];
    }
    return node->is_string() ? node->get<std::string>() : node->dump();
}

namespace {

std::pair<double, double> mean_and_sample_sd(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

SweepSummary aggregate_sweep(std::span<const RunReport> reports, const std::string& group_key,
                             const std::vector<std::string>& expected_groups) {
    const std::string path = resolve_group_path(group_key);
    std::vector<std::string> order = expected_groups;
    std::map<std::string, std::vector<const RunReport*>> groups;
    for (const auto& r : reports) {
        std::string label = group_label(r.config, path);
        if (std::find(order.begin(), order.end(), label) == order.end()) order.push_back(label);
        groups[label].push_back(&r);
    }

    SweepSummary summary;
    summary.group_key = group_key;
    for (const auto& label : order) {
        const auto it = groups.find(label);
        if (it == groups.end()) {
            summary.warnings.push_back("group '" + label + "' has no completed runs; excluded");
            continue;
        }
        std::vector<double> acc, conf;
        for (const RunReport* r : it->second) {
            acc.push_back(r->final_accuracy);
            conf.push_back(r->mean_confounding_rate());
        }
        const auto [am, as] = mean_and_sample_sd(acc);
        const auto [cm, cs] = mean_and_sample_sd(conf);
        summary.rows.push_back({label, it->second.size(), am, as, cm, cs});
    }
    return summary;
}

nlohmann::json to_json(const SweepSummary& summary) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : summary.rows)
        rows.push_back({{"group", r.group},
                        {"n_runs", r.n_runs},
                        {"accuracy_mean", r.accuracy_mean},
                        {"accuracy_sd", r.accuracy_sd},
                        {"confounding_mean", r.confounding_mean},
                        {"confounding_sd", r.confounding_sd}});
    return {{"group_key", summary.group_key}, {"rows", std::move(rows)}, {"warnings", summary.warnings}};
}

SweepSummary summary_from_json(const nlohmann::json& doc) {
    try {
        SweepSummary s;
        s.group_key = doc.at("group_key").get<std::string>();
        for (const auto& r : doc.at("rows"))
            s.rows.push_back({r.at("group").get<std::string>(), r.at("n_runs").get<std::size_t>(),
                              r.at("accuracy_mean").get<double>(), r.at("accuracy_sd").get<double>(),
                              r.at("confounding_mean").get<double>(), r.at("confounding_sd").get<double>()});
        s.warnings = doc.at("warnings").get<std::vector<std::string>>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("sweep.json: ") + e.what());
    }
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << contents;
    if (!out) throw Error("write failed: " + path.string());
}

namespace {

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

std::vector<std::filesystem::path> emit(const RunReport& report, const std::filesystem::path& out_dir) {
    ensure_dir(out_dir);
    const auto json_path = out_dir / "report.json";
    const auto csv_path = out_dir / "series.csv";
    write_text_file(json_path, to_json(report).dump(2) + "\n");

    std::string csv = "iteration,accuracy,confounding_rate,n_promoted\r\n";
    for (const auto& it : report.iterations)
        csv += std::to_string(it.t) + ',' + format_double(it.accuracy) + ',' + format_double(it.confounding_rate) +
               ',' + std::to_string(it.n_promoted) + "\r\n";
    write_text_file(csv_path, csv);
    return {json_path, csv_path};
}

std::vector<std::filesystem::path> emit(const SweepSummary& summary, const std::filesystem::path& out_dir) {
    ensure_dir(out_dir);
    const auto csv_path = out_dir / "sweep.csv";
    const auto json_path = out_dir / "sweep.json";
    std::string csv = csv_field(summary.group_key) +
                      ",n_runs,accuracy_mean,accuracy_sd,confounding_mean,confounding_sd\r\n";
    for (const auto& r : summary.rows)
        csv += csv_field(r.group) + ',' + std::to_string(r.n_runs) + ',' + format_double(r.accuracy_mean) + ',' +
               format_double(r.accuracy_sd) + ',' + format_double(r.confounding_mean) + ',' +
               format_double(r.confounding_sd) + "\r\n";
    write_text_file(csv_path, csv);
    write_text_file(json_path, to_json(summary).dump(2) + "\n");
    return {csv_path, json_path};
}

}  // namespace scope
