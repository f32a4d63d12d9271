#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "almatch/committee.hpp"
#include "almatch/dataset.hpp"
#include "almatch/lwcr.hpp"
#include "almatch/uncertainty.hpp"

namespace almatch {

struct EvalReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const EvalReport&) const = default;
};

/// Precision/recall/F1 over the match class. Zero denominators give 0.
EvalReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
double f1_score(double precision, double recall);
EvalReport evaluate(std::span<const Label> predicted, std::span<const Label> truth);
EvalReport evaluate(const Classifier& member, const FeatureMatrix& x, std::span<const Label> truth);

enum class SeedingMode : std::uint8_t { lwcr, random };
std::string_view to_string(SeedingMode mode);
std::optional<SeedingMode> parse_seeding_mode(std::string_view name);

struct SessionConfig {
    std::size_t init_pool = 6;
    std::size_t batch = 4;
    std::size_t max_iterations = 20;
    double min_f1 = 0.5;
    std::size_t patience = 3;
    Strategy strategy = Strategy::hybrid;
    HybridWeights hybrid_weights;
    std::size_t entropy_member = 2;
    std::vector<ClassifierSpec> classifiers = default_classifier_specs();
    FeatureSchema schema;
    LwcrRule lwcr;
    bool pruning = true;
    double prune_threshold = 0.3;
    SeedingMode seeding = SeedingMode::lwcr;
    /// Without validation labels the plateau rule is off and the history
    /// records training-pool F1 instead.
    bool use_validation = true;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    bool operator==(const SessionConfig&) const = default;
};

enum class StopReason : std::uint8_t { none, plateau, max_iterations, pool_exhausted };
std::string_view to_string(StopReason reason);
std::optional<StopReason> parse_stop_reason(std::string_view name);

struct StopPolicy {
    std::size_t patience = 3;
    double min_f1 = 0.5;
    std::size_t max_iterations = 20;
    bool plateau_enabled = true;
};

/// history[i] is the best member F1 after iteration i, so the current
/// iteration is history.size() - 1. Rules are checked in the order plateau,
/// iteration cap, exhausted pool.
StopReason check_stop(std::span<const double> history, std::size_t unlabeled_remaining, const StopPolicy& policy);

enum class SessionStatus : std::uint8_t { awaiting_labels, training, stopped };
std::string_view to_string(SessionStatus status);
std::optional<SessionStatus> parse_session_status(std::string_view name);

struct LabeledEntry {
    PairId pair = 0;
    Label label = Label::mismatch;
    std::size_t round = 0;  // 0 for the seed pool

    bool operator==(const LabeledEntry&) const = default;
};

struct BestSnapshot {
    std::size_t member = 0;
    std::size_t iteration = 0;
    double f1 = 0.0;
    std::size_t pool_size = 0;  // the member was fit on the first pool_size labeled entries

    bool operator==(const BestSnapshot&) const = default;
};

struct PendingBatch {
    std::uint64_t batch_id = 0;
    std::size_t round = 0;
    std::vector<PairId> pairs;

    bool operator==(const PendingBatch&) const = default;
};

struct QueryRecord {
    std::uint64_t batch_id = 0;
    std::size_t round = 0;
    std::vector<PairId> pairs;

    bool operator==(const QueryRecord&) const = default;
};

struct SessionState {
    std::vector<LabeledEntry> labeled;  // acquisition order
    std::vector<PairId> unlabeled;      // ascending
    std::size_t iteration = 0;
    std::vector<double> history;
    std::optional<BestSnapshot> best;
    SessionStatus status = SessionStatus::awaiting_labels;
    StopReason stop_reason = StopReason::none;
    std::optional<PendingBatch> pending;
    /// Ranked candidates behind the pending batch, used to replace skips.
    std::vector<PairId> reserve;
    std::vector<QueryRecord> queries;
    std::uint64_t next_batch_id = 1;

    bool operator==(const SessionState&) const = default;
};

/// One decision from the oracle; std::nullopt means skip.
struct LabelSubmission {
    PairId pair = 0;
    std::optional<Label> label;
};

class StaleBatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LabelValidationError : public std::runtime_error {
public:
    LabelValidationError(const std::string& message, std::vector<PairId> pairs)
        : std::runtime_error(message), pairs_(std::move(pairs)) {}
    const std::vector<PairId>& pairs() const { return pairs_; }

private:
    std::vector<PairId> pairs_;
};

class SessionStateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Session;

class Oracle {
public:
    virtual ~Oracle() = default;
    /// One decision per requested pair, in request order.
    virtual std::vector<std::optional<Label>> label(std::span<const CandidatePair* const> pairs) = 0;
};

/// Answers from the dataset's ground truth.
class SimulatedOracle : public Oracle {
public:
    std::vector<std::optional<Label>> label(std::span<const CandidatePair* const> pairs) override;
    std::size_t requests() const { return requests_; }
    std::size_t labels_given() const { return labels_given_; }

private:
    std::size_t requests_ = 0;
    std::size_t labels_given_ = 0;
};

struct FinalReport {
    std::optional<BestSnapshot> best;
    std::optional<ClassifierKind> best_kind;
    EvalReport test;
    std::size_t labels = 0;
    std::size_t iterations = 0;
    std::vector<double> history;
    StopReason stop_reason = StopReason::none;
    PruneReport prune;
};

class Session {
public:
    /// Prunes the training split, precomputes features and issues the seed
    /// batch. Throws InsufficientPoolError when fewer than init_pool pairs
    /// survive pruning.
    Session(std::shared_ptr<const DatasetBundle> data, SessionConfig config);

    /// Rebuilds a session around a previously saved state. Throws
    /// SessionStateError if the state does not fit the dataset and config.
    static Session restore(std::shared_ptr<const DatasetBundle> data, SessionConfig config, SessionState state);

    const SessionConfig& config() const { return config_; }
    const SessionState& state() const { return state_; }
    const DatasetBundle& dataset() const { return *data_; }
    const PruneReport& prune_report() const { return prune_; }

    /// Retained training pairs (after pruning), ascending id.
    std::span<const PairId> pool_ids() const { return pool_ids_; }
    const CandidatePair& train_pair(PairId id) const;
    std::span<const double> features(PairId id) const;
    double lwcr_score(PairId id) const;

    /// Applies decisions for the pending batch. Skipped pairs stay unlabeled
    /// and are replaced from the reserve; once a round is complete the
    /// session trains, evaluates, checks the stop rule and queries the next
    /// batch.
    void submit(std::uint64_t batch_id, std::span<const LabelSubmission> decisions);

    /// Asks the oracle for the pending batch and submits its answers. An
    /// oracle failure leaves the session awaiting the same batch.
    void label_pending(Oracle& oracle);

    /// One full round: label the pending batch, which trains and queries.
    void run_iteration(Oracle& oracle);
    void run_to_completion(Oracle& oracle);

    /// Per-member evaluation from the latest training round (validation
    /// split, or the labeled pool in budget-only mode).
    const std::vector<EvalReport>& latest_evaluations() const { return latest_; }
    const TrainedCommittee* committee() const { return committee_ ? &*committee_ : nullptr; }

    /// Refits the best member on its snapshot pool.
    std::unique_ptr<Classifier> best_model() const;
    FinalReport final_report() const;

private:
    Session(std::shared_ptr<const DatasetBundle> data, SessionConfig config, bool issue_seed_batch);

    void prepare();
    void issue_seed_batch();
    void issue_batch(std::vector<PairId> ranked, std::size_t round, std::size_t size);
    void advance();
    void train_and_evaluate();
    std::vector<PairId> extreme_order() const;
    std::size_t row_of(PairId id) const;
    FeatureMatrix pool_matrix(std::size_t count, std::vector<Label>& labels) const;

    std::shared_ptr<const DatasetBundle> data_;
    SessionConfig config_;
    SessionState state_;
    PruneReport prune_;
    std::vector<PairId> pool_ids_;
    std::vector<std::size_t> row_;  // train pair id -> row in features_, npos when pruned
    FeatureMatrix features_;
    std::vector<double> scores_;
    FeatureMatrix valid_x_;
    std::vector<Label> valid_y_;
    FeatureMatrix test_x_;
    std::vector<Label> test_y_;
    std::optional<TrainedCommittee> committee_;
    std::vector<EvalReport> latest_;
};

/// Default feature schema for a dataset: every attribute scored with
/// levenshtein, jaro_winkler and token jaccard.
FeatureSchema default_schema(std::span<const std::string> attributes);

}  // namespace almatch
