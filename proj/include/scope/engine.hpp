#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scope/augment.hpp"
#include "scope/backbone.hpp"
#include "scope/config.hpp"
#include "scope/datasets.hpp"
#include "scope/error.hpp"
#include "scope/metrics.hpp"

namespace scope {

/// Outcome of pseudolabelling one unlabeled sample whose weak-augmented
/// prediction cleared the confidence threshold. `index` refers to
/// EMState::train. Disabled filters leave their verdict at "accept".
struct PseudoLabelRecord {
    std::size_t index = 0;
    int pseudo_class = 0;
    double confidence = 0.0;
    bool gauss_scored = false;  // false when the filter is off or the class passed through
    double gauss_score = 0.0;
    bool gauss_accept = true;
    int knn_count = 0;
    bool knn_accept = true;
    bool promoted = false;
    bool correct = false;  // instrumentation only

    bool operator==(const PseudoLabelRecord&) const = default;
};

struct ConfoundingEntry {
    int t = 0;
    std::size_t unlabeled_at_start = 0;
    std::size_t n_promoted = 0;
    std::size_t n_promoted_incorrect = 0;
    double rate = 0.0;  // n_promoted_incorrect / max(1, unlabeled_at_start)

    bool operator==(const ConfoundingEntry&) const = default;
};

struct PoolEntry {
    std::size_t index = 0;
    int label = 0;  // the true label for original samples, the pseudo-label otherwise
    bool original = true;

    bool operator==(const PoolEntry&) const = default;
};

struct EMState {
    Dataset train;                      // original labeled samples first, then the unlabeled ones
    std::vector<PoolEntry> labeled;     // originals first, promotions appended in order
    std::vector<std::size_t> unlabeled; // ascending sample indices
    ModelParams params;
    AugmentParams augment;
    std::uint64_t seed = 0;
    int t = 0;
    std::vector<ConfoundingEntry> log;
    std::vector<PseudoLabelRecord> last_records;

    bool operator==(const EMState&) const = default;
};

/// Training diverged. Carries the state as it was before the failing step.
class AbortedRun : public Error {
public:
    AbortedRun(const std::string& what, EMState last_good) : Error(what), last_good_(std::move(last_good)) {}
    const EMState& last_good() const noexcept { return last_good_; }

private:
    EMState last_good_;
};

/// Generated (or loaded) data ready for a run: outliers are injected into the
/// unlabeled partition only, so the labeled and test sets stay clean.
struct PreparedData {
    Split split;
    nlohmann::json metadata;
};
PreparedData prepare_data(const RunConfig& config);

/// Initial state: Glorot-initialised network, labeled pool = `split.labeled`.
EMState initial_state(const Split& split, const RunConfig& config);

/// Predicts on weak-augmented inputs; emits a record for every sample whose
/// max probability reaches `confidence_threshold`.
std::vector<PseudoLabelRecord> pseudolabel(const ModelParams& params, const Dataset& train,
                                           std::span<const std::size_t> unlabeled, const AugmentParams& augment,
                                           double confidence_threshold, std::uint64_t draw);

/// Per-record loss weight: 1 when every enabled filter accepts (in oracle mode,
/// when the pseudolabel is correct), else 0.
bool passes_filters(const PseudoLabelRecord& record, FilterMode mode, bool oracle);

/// Cross-entropy of strong-augmented predictions against the pseudo-classes,
/// weighted by passes_filters. A fully masked batch yields loss 0 and zero
/// gradients.
LossAndGrad unsupervised_loss_batch(const ModelParams& params, std::span<const PseudoLabelRecord> records,
                                    const Dataset& train, const AugmentParams& augment, std::uint64_t draw,
                                    FilterMode mode, bool oracle);

/// Fills the Gaussian and kNN verdicts of `records` from predictions under
/// `state.params` on the same weak draw used for pseudolabelling.
void apply_filters(std::vector<PseudoLabelRecord>& records, const EMState& state, const RunConfig& config,
                   std::uint64_t weak_draw);

/// Supervised minibatch SGD on the labeled pool (weak augmentation), as used
/// for warm-up. Deterministic in (state.seed, state.t).
void train_supervised(EMState& state, int epochs, const RunConfig& config);

/// One expectation/maximisation round; see the README for the step order.
EMState em_iteration(const EMState& state, const RunConfig& config);

struct RunOutcome {
    RunReport report;
    EMState final_state;
    /// Records of every EM iteration, index t-1.
    std::vector<std::vector<PseudoLabelRecord>> records;
};

RunOutcome run(const RunConfig& config);
RunOutcome run(const RunConfig& config, const PreparedData& data);

/// Records as CSV:
/// index,pseudo_class,confidence,gauss_score,gauss_accept,knn_count,knn_accept,is_correct
std::string records_csv(std::span<const PseudoLabelRecord> records);

}  // namespace scope
