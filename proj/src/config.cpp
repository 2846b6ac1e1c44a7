#include "scope/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "scope/error.hpp"

namespace scope {

std::string to_string(FilterMode mode) {
    switch (mode) {
        case FilterMode::kNone: return "none";
        case FilterMode::kGaussian: return "gaussian";
        case FilterMode::kKnn: return "knn";
        case FilterMode::kBoth: return "both";
    }
    return "none";
}

std::string to_string(Manifold manifold) {
    return manifold == Manifold::kPenultimate ? "penultimate" : "probabilities";
}

bool uses_gaussian(FilterMode mode) { return mode == FilterMode::kGaussian || mode == FilterMode::kBoth; }
bool uses_knn(FilterMode mode) { return mode == FilterMode::kKnn || mode == FilterMode::kBoth; }

namespace {

// Reads the fields of one JSON object, tracking which keys were consumed so
// that leftovers can be reported as unknown.
class Section {
public:
    Section(const nlohmann::json& doc, std::string prefix) : doc_(doc), prefix_(std::move(prefix)) {
        if (!doc_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "must be an object");
    }

    bool has(const std::string& key) const { return doc_.contains(key); }

    template <typename T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        if (!doc_.contains(key)) return;
        try {
            out = doc_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(path(key), "has the wrong type");
        }
    }

    template <typename T>
    void require(const std::string& key, T& out) {
        if (!doc_.contains(key)) throw ConfigError(path(key), "is required");
        read(key, out);
    }

    Section sub(const std::string& key) {
        seen_.insert(key);
        static const nlohmann::json empty = nlohmann::json::object();
        return Section(doc_.contains(key) ? doc_.at(key) : empty, path(key));
    }

    void reject_unknown() const {
        for (const auto& [key, _] : doc_.items())
            if (!seen_.contains(key)) throw ConfigError(path(key), "is not a known field");
    }

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

private:
    const nlohmann::json& doc_;
    std::string prefix_;
    std::set<std::string> seen_;
};

// Unsigned fields arrive as JSON numbers; negative values must not wrap.
void read_count(Section& s, const std::string& key, std::size_t& out) {
    long long v = static_cast<long long>(out);
    s.read(key, v);
    if (v < 0) throw ConfigError(s.path(key), "must be non-negative");
    out = static_cast<std::size_t>(v);
}

void check(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& doc) {
    RunConfig c;
    Section root(doc, "");

    {
        Section d = root.sub("dataset");
        d.require("generator", c.dataset.generator);
        read_count(d, "n_per_class", c.dataset.n_per_class);
        d.read("classes", c.dataset.classes);
        d.read("dim", c.dataset.dim);
        d.read("class_separation", c.dataset.class_separation);
        d.read("cov_scale", c.dataset.cov_scale);
        read_count(d, "n", c.dataset.n);
        d.read("noise_sd", c.dataset.noise_sd);
        d.read("path", c.dataset.path);
        d.read("outlier_fraction", c.dataset.outlier_fraction);
        d.read("outlier_scale", c.dataset.outlier_scale);
        read_count(d, "n_labeled", c.dataset.n_labeled);
        read_count(d, "n_test", c.dataset.n_test);
        d.read("stratified", c.dataset.stratified);
        d.reject_unknown();
    }
    {
        Section b = root.sub("backbone");
        b.read("hidden", c.backbone.hidden);
        b.read("learning_rate", c.backbone.learning_rate);
        read_count(b, "batch_size", c.backbone.batch_size);
        b.read("warmup_epochs", c.backbone.warmup_epochs);
        b.read("epochs_per_iteration", c.backbone.epochs_per_iteration);
        b.reject_unknown();
    }
    {
        Section a = root.sub("augment");
        a.read("weak_jitter", c.augment.weak_jitter);
        a.read("strong_jitter", c.augment.strong_jitter);
        a.read("strong_dropout", c.augment.strong_dropout);
        a.reject_unknown();
    }
    {
        Section s = root.sub("scope");
        s.read("confidence_threshold", c.scope.confidence_threshold);
        s.read("lambda_u", c.scope.lambda_u);
        s.read("em_iterations", c.scope.em_iterations);
        std::string mode = to_string(c.scope.filter_mode);
        s.read("filter_mode", mode);
        if (mode == "none") c.scope.filter_mode = FilterMode::kNone;
        else if (mode == "gaussian") c.scope.filter_mode = FilterMode::kGaussian;
        else if (mode == "knn") c.scope.filter_mode = FilterMode::kKnn;
        else if (mode == "both") c.scope.filter_mode = FilterMode::kBoth;
        else throw ConfigError("scope.filter_mode", "must be one of none, gaussian, knn, both");
        s.read("gamma", c.scope.gamma);
        if (uses_knn(c.scope.filter_mode)) {
            s.require("k", c.scope.k);
        } else {
            s.read("k", c.scope.k);
        }
        s.read("refinement_rounds", c.scope.refinement_rounds);
        std::string manifold = to_string(c.scope.manifold);
        s.read("manifold", manifold);
        if (manifold == "penultimate") c.scope.manifold = Manifold::kPenultimate;
        else if (manifold == "probabilities") c.scope.manifold = Manifold::kProbabilities;
        else throw ConfigError("scope.manifold", "must be penultimate or probabilities");
        s.read("repseudolabel", c.scope.repseudolabel);
        s.read("oracle_filter", c.scope.oracle_filter);
        s.read("dump_records", c.scope.dump_records);
        s.reject_unknown();
    }
    root.require("seed", c.seed);
    root.read("out_dir", c.out_dir);
    root.reject_unknown();

    validate(c);
    return c;
}

void validate(const RunConfig& c) {
    const auto& d = c.dataset;
    check(d.generator == "gaussian_mixture" || d.generator == "two_moons" || d.generator == "csv",
          "dataset.generator", "must be gaussian_mixture, two_moons or csv");
    if (d.generator == "gaussian_mixture") {
        check(d.classes >= 2, "dataset.classes", "must be at least 2");
        check(d.dim >= 2, "dataset.dim", "must be at least 2");
        check(d.n_per_class >= 1, "dataset.n_per_class", "must be at least 1");
        check(d.class_separation > 0.0, "dataset.class_separation", "must be positive");
        check(d.cov_scale >= 0.0, "dataset.cov_scale", "must be non-negative");
    }
    if (d.generator == "two_moons") {
        check(d.n >= 2 && d.n % 2 == 0, "dataset.n", "must be a positive even count");
        check(d.noise_sd >= 0.0, "dataset.noise_sd", "must be non-negative");
    }
    if (d.generator == "csv") check(!d.path.empty(), "dataset.path", "is required for the csv generator");
    check(d.outlier_fraction >= 0.0 && d.outlier_fraction <= 0.5, "dataset.outlier_fraction", "must lie in [0, 0.5]");
    check(d.outlier_scale >= 0.0, "dataset.outlier_scale", "must be non-negative");
    check(d.n_labeled >= 1, "dataset.n_labeled", "must be at least 1");
    check(d.generator == "csv" || d.n_test >= 1, "dataset.n_test", "must be at least 1");

    const auto& b = c.backbone;
    for (int h : b.hidden) check(h >= 1, "backbone.hidden", "widths must be positive");
    check(b.learning_rate > 0.0, "backbone.learning_rate", "must be positive");
    check(b.batch_size >= 1, "backbone.batch_size", "must be at least 1");
    check(b.warmup_epochs >= 0, "backbone.warmup_epochs", "must be non-negative");
    check(b.epochs_per_iteration >= 0, "backbone.epochs_per_iteration", "must be non-negative");

    const auto& a = c.augment;
    check(a.weak_jitter >= 0.0, "augment.weak_jitter", "must be non-negative");
    check(a.strong_jitter > a.weak_jitter, "augment.strong_jitter", "must exceed augment.weak_jitter");
    check(a.strong_dropout >= 0.0 && a.strong_dropout < 1.0, "augment.strong_dropout", "must lie in [0, 1)");

    const auto& s = c.scope;
    check(s.confidence_threshold > 0.0 && s.confidence_threshold <= 1.0, "scope.confidence_threshold",
          "must lie in (0, 1]");
    check(s.lambda_u >= 0.0, "scope.lambda_u", "must be non-negative");
    check(s.em_iterations >= 0, "scope.em_iterations", "must be non-negative");
    check(s.refinement_rounds >= 0, "scope.refinement_rounds", "must be non-negative");
    if (uses_knn(s.filter_mode)) {
        check(s.gamma > -1.0 && s.gamma < 1.0, "scope.gamma", "must lie in (-1, 1)");
        check(s.k >= 1, "scope.k", "must be at least 1");
    }
}

nlohmann::json to_json(const RunConfig& c) {
    const auto& d = c.dataset;
    const auto& b = c.backbone;
    const auto& a = c.augment;
    const auto& s = c.scope;
    return {
        {"dataset",
         {{"generator", d.generator},
          {"n_per_class", d.n_per_class},
          {"classes", d.classes},
          {"dim", d.dim},
          {"class_separation", d.class_separation},
          {"cov_scale", d.cov_scale},
          {"n", d.n},
          {"noise_sd", d.noise_sd},
          {"path", d.path},
          {"outlier_fraction", d.outlier_fraction},
          {"outlier_scale", d.outlier_scale},
          {"n_labeled", d.n_labeled},
          {"n_test", d.n_test},
          {"stratified", d.stratified}}},
        {"backbone",
         {{"hidden", b.hidden},
          {"learning_rate", b.learning_rate},
          {"batch_size", b.batch_size},
          {"warmup_epochs", b.warmup_epochs},
          {"epochs_per_iteration", b.epochs_per_iteration}}},
        {"augment", {{"weak_jitter", a.weak_jitter}, {"strong_jitter", a.strong_jitter}, {"strong_dropout", a.strong_dropout}}},
        {"scope",
         {{"confidence_threshold", s.confidence_threshold},
          {"lambda_u", s.lambda_u},
          {"em_iterations", s.em_iterations},
          {"filter_mode", to_string(s.filter_mode)},
          {"gamma", s.gamma},
          {"k", s.k},
          {"refinement_rounds", s.refinement_rounds},
          {"manifold", to_string(s.manifold)},
          {"repseudolabel", s.repseudolabel},
          {"oracle_filter", s.oracle_filter},
          {"dump_records", s.dump_records}}},
        {"seed", c.seed},
        {"out_dir", c.out_dir},
    };
}

nlohmann::json load_config_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open " + path);
    try {
        return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("<file>", path + ": " + e.what());
    }
}

void apply_override(nlohmann::json& doc, const std::string& dotted_path, const std::string& value) {
    if (dotted_path.empty()) throw ConfigError("<override>", "empty field path");
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        parsed = value;
    }
    nlohmann::json* node = &doc;
    std::stringstream parts(dotted_path);
    std::string part;
    std::vector<std::string> keys;
    while (std::getline(parts, part, '.')) keys.push_back(part);
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        if (!node->is_object()) throw ConfigError(dotted_path, "parent is not an object");
        node = &(*node)[keys[i]];
        if (node->is_null()) *node = nlohmann::json::object();
    }
    if (!node->is_object()) throw ConfigError(dotted_path, "parent is not an object");
    (*node)[keys.back()] = std::move(parsed);
}

}  // namespace scope
