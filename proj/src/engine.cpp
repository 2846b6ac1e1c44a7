#include "scope/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>

#include "scope/filters.hpp"

namespace scope {

namespace {

// Generator for one stage (warm-up is t = 0, EM iteration t >= 1).
Rng stage_rng(std::uint64_t seed, Stream stream, int t) {
    return Rng(seed, (static_cast<std::uint64_t>(stream) << 32) + static_cast<std::uint64_t>(t));
}

// Augmented feature rows; each sample's draw depends on its index only, so
// the same sample gets the same perturbation whatever batch it lands in.
Matrix augment_rows(const Dataset& train, std::span<const std::size_t> ids, const AugmentParams& augment,
                    std::uint64_t draw, bool strong_branch) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), train.dim);
    const Rng base(draw, Stream::kAugment);
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto& x = train.samples[ids[r]].features;
        const std::uint64_t row_draw = base.derive(ids[r]);
        const std::vector<double> v = strong_branch ? strong(x, augment, row_draw) : weak(x, augment, row_draw);
        for (int j = 0; j < train.dim; ++j) out(static_cast<Eigen::Index>(r), j) = v[static_cast<std::size_t>(j)];
    }
    return out;
}

void add_scaled(ModelParams& into, double scale, const ModelParams& grads) {
    for (std::size_t l = 0; l < into.layers.size(); ++l) {
        into.layers[l].weights += scale * grads.layers[l].weights;
        into.layers[l].bias += scale * grads.layers[l].bias;
    }
}

std::vector<std::size_t> record_ids(std::span<const PseudoLabelRecord> records) {
    std::vector<std::size_t> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.index);
    return ids;
}

double test_accuracy(const ModelParams& params, const Dataset& test) {
    const auto preds = predict(params, test.features());
    const auto truth = test.truths();
    return accuracy(preds, truth);
}

std::size_t steps_for(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

// Cyclic window [start, start + count) over `order`.
std::vector<std::size_t> cyclic_batch(const std::vector<std::size_t>& order, std::size_t start, std::size_t count) {
    std::vector<std::size_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = order[(start + i) % order.size()];
    return out;
}

}  // namespace

PreparedData prepare_data(const RunConfig& config) {
    validate(config);
    const auto& dc = config.dataset;
    PreparedData out;
    nlohmann::json params = to_json(config)["dataset"];

    if (dc.generator == "csv") {
        const std::filesystem::path dir(dc.path);
        int classes = 0;
        if (std::filesystem::exists(dir / "dataset.json")) {
            classes = load_config_document((dir / "dataset.json").string()).value("C", 0);
        }
        if (classes < 1) {
            // Infer from the union of all three files.
            for (const char* name : {"labeled.csv", "unlabeled.csv", "test.csv"})
                classes = std::max(classes, load_csv(dir / name).num_classes);
        }
        out.split.labeled = load_csv(dir / "labeled.csv", classes);
        out.split.unlabeled = load_csv(dir / "unlabeled.csv", classes);
        out.split.test = load_csv(dir / "test.csv", classes);
        for (auto& s : out.split.unlabeled.samples) s.visible_label.reset();
    } else {
        Dataset full = dc.generator == "two_moons"
                           ? gen_two_moons(dc.n, dc.noise_sd, config.seed)
                           : gen_gaussian_mixture(dc.n_per_class, dc.classes, dc.dim, dc.class_separation,
                                                  dc.cov_scale, config.seed);
        out.split = split(full, {dc.n_labeled, dc.n_test, config.seed, dc.stratified});
        if (dc.outlier_fraction > 0.0 && !out.split.unlabeled.empty())
            out.split.unlabeled =
                inject_outliers(out.split.unlabeled, dc.outlier_fraction, dc.outlier_scale, config.seed);
    }
    const auto& sp = out.split;
    out.metadata = {{"n", sp.labeled.size() + sp.unlabeled.size() + sp.test.size()},
                    {"D", sp.labeled.dim},
                    {"C", sp.labeled.num_classes},
                    {"seed", config.seed},
                    {"generator", dc.generator},
                    {"params", params},
                    {"n_labeled", sp.labeled.size()},
                    {"n_unlabeled", sp.unlabeled.size()},
                    {"n_test", sp.test.size()},
                    {"n_outliers", sp.unlabeled.count_outliers()}};
    return out;
}

EMState initial_state(const Split& split, const RunConfig& config) {
    if (split.labeled.empty()) throw InvalidInput("labeled pool is empty");
    EMState st;
    st.seed = config.seed;
    st.train.num_classes = split.labeled.num_classes;
    st.train.dim = split.labeled.dim;
    for (const auto& s : split.labeled.samples) {
        st.labeled.push_back({st.train.size(), *s.visible_label, true});
        st.train.samples.push_back(s);
    }
    for (const auto& s : split.unlabeled.samples) {
        st.unlabeled.push_back(st.train.size());
        st.train.samples.push_back(s);
        st.train.samples.back().visible_label.reset();
    }

    std::vector<int> dims{st.train.dim};
    dims.insert(dims.end(), config.backbone.hidden.begin(), config.backbone.hidden.end());
    dims.push_back(st.train.num_classes);
    Rng init(config.seed, Stream::kInit);
    st.params = ModelParams::glorot(dims, init);

    Dataset clean{st.train.num_classes, st.train.dim, {}};
    for (const auto& s : st.train.samples)
        if (!s.is_injected_outlier) clean.samples.push_back(s);
    st.augment = AugmentParams::scaled(feature_scale(clean), config.augment.weak_jitter, config.augment.strong_jitter,
                                       config.augment.strong_dropout);
    return st;
}

std::vector<PseudoLabelRecord> pseudolabel(const ModelParams& params, const Dataset& train,
                                           std::span<const std::size_t> unlabeled, const AugmentParams& augment,
                                           double confidence_threshold, std::uint64_t draw) {
    const int classes = params.num_classes();
    if (!(confidence_threshold > 1.0 / classes && confidence_threshold <= 1.0))
        throw InvalidInput("confidence threshold must lie in (1/C, 1]");
    std::vector<PseudoLabelRecord> records;
    if (unlabeled.empty()) return records;
    const ForwardResult fwd = forward(params, augment_rows(train, unlabeled, augment, draw, false));
    for (std::size_t r = 0; r < unlabeled.size(); ++r) {
        Eigen::Index arg = 0;
        const double conf = fwd.probabilities.row(static_cast<Eigen::Index>(r)).maxCoeff(&arg);
        if (conf < confidence_threshold) continue;
        PseudoLabelRecord rec;
        rec.index = unlabeled[r];
        rec.pseudo_class = static_cast<int>(arg);
        rec.confidence = conf;
        rec.correct = rec.pseudo_class == train.samples[unlabeled[r]].hidden_truth;
        records.push_back(rec);
    }
    return records;
}

bool passes_filters(const PseudoLabelRecord& record, FilterMode mode, bool oracle) {
    if (oracle) return record.correct;
    if (uses_gaussian(mode) && !record.gauss_accept) return false;
    if (uses_knn(mode) && !record.knn_accept) return false;
    return true;
}

LossAndGrad unsupervised_loss_batch(const ModelParams& params, std::span<const PseudoLabelRecord> records,
                                    const Dataset& train, const AugmentParams& augment, std::uint64_t draw,
                                    FilterMode mode, bool oracle) {
    if (records.empty()) throw InvalidInput("unsupervised loss needs at least one record");
    Vector weights(static_cast<Eigen::Index>(records.size()));
    std::vector<int> targets;
    targets.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        weights[static_cast<Eigen::Index>(i)] = passes_filters(records[i], mode, oracle) ? 1.0 : 0.0;
        targets.push_back(records[i].pseudo_class);
    }
    if (weights.sum() == 0.0) return {0.0, ModelParams::zeros(params.dims())};
    const auto ids = record_ids(records);
    return loss_and_grad(params, augment_rows(train, ids, augment, draw, true),
                         one_hot(targets, params.num_classes()), weights);
}

void apply_filters(std::vector<PseudoLabelRecord>& records, const EMState& state, const RunConfig& config,
                   std::uint64_t weak_draw) {
    const auto& sc = config.scope;
    if (records.empty() || sc.filter_mode == FilterMode::kNone) return;
    const auto ids = record_ids(records);
    const ForwardResult fwd = forward(state.params, augment_rows(state.train, ids, state.augment, weak_draw, false));
    std::vector<int> pseudo;
    for (const auto& r : records) pseudo.push_back(r.pseudo_class);

    if (uses_gaussian(sc.filter_mode)) {
        const auto verdicts = gaussian_filter(fwd.probabilities, pseudo, sc.refinement_rounds);
        for (std::size_t i = 0; i < records.size(); ++i) {
            records[i].gauss_accept = verdicts[i].accepted;
            records[i].gauss_scored = !std::isnan(verdicts[i].score);
            records[i].gauss_score = records[i].gauss_scored ? verdicts[i].score : 0.0;
        }
    }
    if (uses_knn(sc.filter_mode)) {
        std::vector<std::size_t> lab_ids;
        std::vector<int> lab_classes;
        for (const auto& e : state.labeled) {
            lab_ids.push_back(e.index);
            lab_classes.push_back(e.label);
        }
        const ForwardResult lab = forward(state.params, state.train.features(lab_ids));
        const bool penult = sc.manifold == Manifold::kPenultimate;
        const auto verdicts = knn_filter(penult ? lab.penultimate : lab.probabilities, lab_classes,
                                         penult ? fwd.penultimate : fwd.probabilities, pseudo, sc.gamma, sc.k);
        for (std::size_t i = 0; i < records.size(); ++i) {
            records[i].knn_accept = verdicts[i].accepted;
            records[i].knn_count = static_cast<int>(verdicts[i].score);
        }
    }
}

void train_supervised(EMState& state, int epochs, const RunConfig& config) {
    if (state.labeled.empty()) throw InvalidInput("labeled pool is empty");
    const EMState before = state;
    Rng shuffle_rng = stage_rng(state.seed, Stream::kShuffle, state.t);
    Rng aug_rng = stage_rng(state.seed, Stream::kAugment, state.t);
    const std::size_t batch = config.backbone.batch_size;
    const std::size_t n = state.labeled.size();
    std::vector<std::size_t> order(n);
    for (int e = 0; e < epochs; ++e) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        shuffle_rng.shuffle(order);
        for (std::size_t s = 0; s < steps_for(n, batch); ++s) {
            const std::size_t count = std::min(batch, n - s * batch);
            std::vector<std::size_t> ids(count);
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) {
                const auto& entry = state.labeled[order[s * batch + i]];
                ids[i] = entry.index;
                labels[i] = entry.label;
            }
            const auto lg = loss_and_grad(state.params, augment_rows(state.train, ids, state.augment, aug_rng.next_u64(), false),
                                          one_hot(labels, state.params.num_classes()),
                                          Vector::Ones(static_cast<Eigen::Index>(count)));
            if (!std::isfinite(lg.loss)) throw AbortedRun("supervised loss is not finite", before);
            try {
                state.params = sgd_step(state.params, lg.grads, config.backbone.learning_rate);
            } catch (const TrainingDiverged& e) {
                throw AbortedRun(e.what(), before);
            }
        }
    }
}

EMState em_iteration(const EMState& state, const RunConfig& config) {
    if (state.labeled.empty()) throw InvalidInput("labeled pool is empty");
    const auto& sc = config.scope;
    EMState next = state;
    next.t = state.t + 1;

    if (sc.repseudolabel) {
        std::vector<PoolEntry> kept;
        for (const auto& e : next.labeled) {
            if (e.original) kept.push_back(e);
            else next.unlabeled.push_back(e.index);
        }
        next.labeled = std::move(kept);
        std::sort(next.unlabeled.begin(), next.unlabeled.end());
    }
    const std::size_t unlabeled_at_start = next.unlabeled.size();

    Rng aug_rng = stage_rng(state.seed, Stream::kAugment, next.t);
    Rng shuffle_rng = stage_rng(state.seed, Stream::kShuffle, next.t);

    // Expectation: pseudolabels and filter verdicts under the current parameters.
    const std::uint64_t weak_draw = aug_rng.next_u64();
    std::vector<PseudoLabelRecord> records =
        pseudolabel(next.params, next.train, next.unlabeled, next.augment, sc.confidence_threshold, weak_draw);
    apply_filters(records, next, config, weak_draw);

    // Maximisation: supervised + masked unsupervised loss, 1:1 interleaved batches.
    const std::size_t batch = config.backbone.batch_size;
    const std::size_t n_lab = next.labeled.size();
    const std::size_t n_rec = records.size();
    const std::size_t steps = std::max(steps_for(n_lab, batch), steps_for(n_rec, batch));
    std::vector<std::size_t> lab_order(n_lab), rec_order(n_rec);
    std::vector<PseudoLabelRecord> rec_batch;
    for (int e = 0; e < config.backbone.epochs_per_iteration; ++e) {
        for (std::size_t i = 0; i < n_lab; ++i) lab_order[i] = i;
        for (std::size_t i = 0; i < n_rec; ++i) rec_order[i] = i;
        shuffle_rng.shuffle(lab_order);
        shuffle_rng.shuffle(rec_order);
        for (std::size_t s = 0; s < steps; ++s) {
            const auto lab_pos = cyclic_batch(lab_order, s * batch, std::min(batch, n_lab));
            std::vector<std::size_t> ids;
            std::vector<int> labels;
            for (std::size_t p : lab_pos) {
                ids.push_back(next.labeled[p].index);
                labels.push_back(next.labeled[p].label);
            }
            LossAndGrad total = loss_and_grad(next.params, augment_rows(next.train, ids, next.augment, aug_rng.next_u64(), false),
                                              one_hot(labels, next.params.num_classes()),
                                              Vector::Ones(static_cast<Eigen::Index>(ids.size())));
            const std::uint64_t strong_draw = aug_rng.next_u64();
            if (n_rec > 0 && sc.lambda_u > 0.0) {
                rec_batch.clear();
                for (std::size_t p : cyclic_batch(rec_order, s * batch, std::min(batch, n_rec)))
                    rec_batch.push_back(records[p]);
                const LossAndGrad unsup = unsupervised_loss_batch(next.params, rec_batch, next.train, next.augment,
                                                                  strong_draw, sc.filter_mode, sc.oracle_filter);
                total.loss += sc.lambda_u * unsup.loss;
                add_scaled(total.grads, sc.lambda_u, unsup.grads);
            }
            if (!std::isfinite(total.loss)) throw AbortedRun("training loss is not finite", state);
            try {
                next.params = sgd_step(next.params, total.grads, config.backbone.learning_rate);
            } catch (const TrainingDiverged& ex) {
                throw AbortedRun(ex.what(), state);
            }
        }
    }

    // Promotion into the labeled pool; pseudo-labels become visible labels.
    ConfoundingEntry entry;
    entry.t = next.t;
    entry.unlabeled_at_start = unlabeled_at_start;
    std::vector<char> promoted(next.train.size(), 0);
    for (auto& r : records) {
        if (!passes_filters(r, sc.filter_mode, sc.oracle_filter)) continue;
        r.promoted = true;
        promoted[r.index] = 1;
        next.labeled.push_back({r.index, r.pseudo_class, false});
        ++entry.n_promoted;
        if (!r.correct) ++entry.n_promoted_incorrect;
    }
    std::erase_if(next.unlabeled, [&](std::size_t id) { return promoted[id] != 0; });
    entry.rate = static_cast<double>(entry.n_promoted_incorrect) /
                 static_cast<double>(std::max<std::size_t>(1, unlabeled_at_start));
    next.log.push_back(entry);
    next.last_records = std::move(records);
    return next;
}

RunOutcome run(const RunConfig& config) { return run(config, prepare_data(config)); }

RunOutcome run(const RunConfig& config, const PreparedData& data) {
    validate(config);
    if (data.split.test.empty()) throw InvalidInput("test set is empty");
    const auto started = std::chrono::steady_clock::now();

    RunOutcome out;
    EMState state = initial_state(data.split, config);
    train_supervised(state, config.backbone.warmup_epochs, config);
    out.report.iterations.push_back({0, test_accuracy(state.params, data.split.test), 0.0, 0});

    for (int i = 0; i < config.scope.em_iterations; ++i) {
        state = em_iteration(state, config);
        const auto& log = state.log.back();
        out.report.iterations.push_back({state.t, test_accuracy(state.params, data.split.test), log.rate, log.n_promoted});
        out.records.push_back(state.last_records);
    }

    out.report.config = to_json(config);
    out.report.seed = config.seed;
    out.report.final_accuracy = out.report.iterations.back().accuracy;
    out.report.final_ci = binomial_interval(out.report.final_accuracy, data.split.test.size());
    out.report.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    out.final_state = std::move(state);
    return out;
}

std::string records_csv(std::span<const PseudoLabelRecord> records) {
    std::string csv = "index,pseudo_class,confidence,gauss_score,gauss_accept,knn_count,knn_accept,is_correct\r\n";
    for (const auto& r : records) {
        csv += std::to_string(r.index) + ',' + std::to_string(r.pseudo_class) + ',' + format_double(r.confidence) + ',' +
               (r.gauss_scored ? format_double(r.gauss_score) : std::string()) + ',' + (r.gauss_accept ? "1" : "0") +
               ',' + std::to_string(r.knn_count) + ',' + (r.knn_accept ? "1" : "0") + ',' + (r.correct ? "1" : "0") +
               "\r\n";
    }
    return csv;
}

}  // namespace scope
