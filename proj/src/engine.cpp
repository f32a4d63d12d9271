#include "almatch/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_set>
#include <utility>

#include "almatch/rng.hpp"

namespace almatch {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

// Stream tags for mix_seed so that each random decision draws from its own
// sequence.
constexpr std::uint64_t kSeedingStream = 0x5eed;
constexpr std::uint64_t kQueryStream = 0x9e7;

FeatureMatrix vectorize_split(std::span<const CandidatePair> pairs, const FeatureSchema& schema,
                              std::vector<Label>& labels) {
    FeatureMatrix x(pairs.size(), schema.dimension());
    labels.clear();
    labels.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto v = vectorize(pairs[i], schema);
        std::copy(v.begin(), v.end(), x.row(i).begin());
        labels.push_back(pairs[i].truth.value_or(Label::mismatch));
    }
    return x;
}

}  // namespace

std::size_t DatasetBundle::total_matches() const {
    std::size_t n = 0;
    for (const auto* split : {&train, &valid, &test}) {
        for (const auto& p : *split) n += (p.truth && *p.truth == Label::match) ? 1 : 0;
    }
    return n;
}

double f1_score(double precision, double recall) {
    if (precision + recall <= 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

EvalReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    EvalReport r{tp, fp, fn, tn, 0.0, 0.0, 0.0};
    r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    r.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    r.f1 = f1_score(r.precision, r.recall);
    return r;
}

EvalReport evaluate(std::span<const Label> predicted, std::span<const Label> truth) {
    if (predicted.size() != truth.size()) throw ShapeError("prediction and truth lengths differ");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predicted[i] == Label::match;
        const bool t = truth[i] == Label::match;
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
        tn += !p && !t;
    }
    return report_from_counts(tp, fp, fn, tn);
}

EvalReport evaluate(const Classifier& member, const FeatureMatrix& x, std::span<const Label> truth) {
    return evaluate(predict_labels(member, x), truth);
}

std::string_view to_string(SeedingMode mode) { return mode == SeedingMode::lwcr ? "lwcr" : "random"; }

std::optional<SeedingMode> parse_seeding_mode(std::string_view name) {
    if (name == "lwcr" || name == "rule") return SeedingMode::lwcr;
    if (name == "random") return SeedingMode::random;
    return std::nullopt;
}

std::string_view to_string(StopReason reason) {
    switch (reason) {
        case StopReason::none: return "none";
        case StopReason::plateau: return "plateau";
        case StopReason::max_iterations: return "max_iterations";
        case StopReason::pool_exhausted: return "pool_exhausted";
    }
    return "none";
}

std::optional<StopReason> parse_stop_reason(std::string_view name) {
    for (auto r : {StopReason::none, StopReason::plateau, StopReason::max_iterations, StopReason::pool_exhausted}) {
        if (to_string(r) == name) return r;
    }
    return std::nullopt;
}

std::string_view to_string(SessionStatus status) {
    switch (status) {
        case SessionStatus::awaiting_labels: return "awaiting_labels";
        case SessionStatus::training: return "training";
        case SessionStatus::stopped: return "stopped";
    }
    return "stopped";
}

std::optional<SessionStatus> parse_session_status(std::string_view name) {
    for (auto s : {SessionStatus::awaiting_labels, SessionStatus::training, SessionStatus::stopped}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

void SessionConfig::validate() const {
    if (init_pool == 0 || init_pool % 2 != 0) {
        throw ConfigError("session.init_pool", "must be a positive even number");
    }
    if (batch == 0) throw ConfigError("session.batch", "must be at least 1");
    if (max_iterations == 0) throw ConfigError("session.max_iterations", "must be at least 1");
    if (!(min_f1 >= 0.0 && min_f1 <= 1.0)) throw ConfigError("session.min_f1", "must lie in [0, 1]");
    if (patience == 0) throw ConfigError("session.patience", "must be at least 1");
    if (!(prune_threshold >= 0.0 && prune_threshold <= 1.0)) {
        throw ConfigError("prune.threshold", "must lie in [0, 1]");
    }
    hybrid_weights.validate();
    if (classifiers.empty()) throw ConfigError("classifiers", "committee needs at least one member");
    for (std::size_t i = 0; i < classifiers.size(); ++i) {
        classifiers[i].validate("classifiers[" + std::to_string(i) + "]");
    }
    if (strategy == Strategy::entropy && entropy_member >= classifiers.size()) {
        throw ConfigError("session.entropy_member", "entropy member index outside the committee");
    }
    if (schema.dimension() == 0) throw ConfigError("schema", "schema must assign at least one metric");
    lwcr.validate();
}

StopReason check_stop(std::span<const double> history, std::size_t unlabeled_remaining, const StopPolicy& policy) {
    if (history.empty()) return unlabeled_remaining == 0 ? StopReason::pool_exhausted : StopReason::none;
    const std::size_t iteration = history.size() - 1;
    if (policy.plateau_enabled) {
        const auto best_it = std::max_element(history.begin(), history.end());  // first occurrence
        const auto stalled = static_cast<std::size_t>(history.end() - best_it) - 1;
        if (stalled >= policy.patience && *best_it >= policy.min_f1) return StopReason::plateau;
    }
    if (iteration >= policy.max_iterations) return StopReason::max_iterations;
    if (unlabeled_remaining == 0) return StopReason::pool_exhausted;
    return StopReason::none;
}

std::vector<std::optional<Label>> SimulatedOracle::label(std::span<const CandidatePair* const> pairs) {
    ++requests_;
    std::vector<std::optional<Label>> out;
    out.reserve(pairs.size());
    for (const auto* p : pairs) {
        if (!p->truth) throw OracleError("pair " + std::to_string(p->id) + " has no ground-truth label");
        out.push_back(*p->truth);
        ++labels_given_;
    }
    return out;
}

FeatureSchema default_schema(std::span<const std::string> attributes) {
    FeatureSchema schema;
    for (const auto& a : attributes) {
        schema.features.push_back({a, {MetricKind::levenshtein, MetricKind::jaro_winkler, MetricKind::jaccard_token}});
    }
    return schema;
}

Session::Session(std::shared_ptr<const DatasetBundle> data, SessionConfig config)
    : Session(std::move(data), std::move(config), true) {}

Session::Session(std::shared_ptr<const DatasetBundle> data, SessionConfig config, bool issue_seed)
    : data_(std::move(data)), config_(std::move(config)) {
    if (!data_) throw std::invalid_argument("session needs a dataset");
    if (config_.schema.features.empty()) config_.schema = default_schema(data_->attributes);
    if (config_.lwcr.terms.empty()) config_.lwcr = LwcrRule::uniform(config_.schema);
    config_.validate();
    if (config_.use_validation && data_->valid.empty()) {
        throw ConfigError("session.use_validation", "dataset has no validation pairs");
    }
    prepare();
    if (issue_seed) issue_seed_batch();
}

void Session::prepare() {
    const auto& train = data_->train;
    std::vector<CandidatePair> retained;
    if (config_.pruning) {
        auto result = prune(train, config_.lwcr, config_.prune_threshold);
        retained = std::move(result.retained);
        prune_ = result.report;
    } else {
        retained.assign(train.begin(), train.end());
        prune_.retained = train.size();
        prune_.has_truth = !train.empty() && std::all_of(train.begin(), train.end(),
                                                         [](const auto& p) { return p.truth.has_value(); });
        for (const auto& p : train) prune_.retained_matches += (p.truth && *p.truth == Label::match) ? 1 : 0;
        prune_.threshold = 0.0;
    }
    if (retained.size() < config_.init_pool) {
        throw InsufficientPoolError("only " + std::to_string(retained.size()) +
                                    " training pairs remain after pruning; the initial pool needs " +
                                    std::to_string(config_.init_pool));
    }

    row_.assign(train.size(), npos);
    pool_ids_.clear();
    scores_.clear();
    features_ = FeatureMatrix(retained.size(), config_.schema.dimension());
    for (std::size_t i = 0; i < retained.size(); ++i) {
        const auto& p = retained[i];
        if (p.id >= train.size()) throw SessionStateError("train pair ids must be row indices");
        row_[p.id] = i;
        pool_ids_.push_back(p.id);
        scores_.push_back(almatch::lwcr_score(p, config_.lwcr));
        const auto v = vectorize(p, config_.schema);
        std::copy(v.begin(), v.end(), features_.row(i).begin());
    }
    valid_x_ = vectorize_split(data_->valid, config_.schema, valid_y_);
    test_x_ = vectorize_split(data_->test, config_.schema, test_y_);
}

std::size_t Session::row_of(PairId id) const {
    if (id >= row_.size() || row_[id] == npos) {
        throw std::out_of_range("pair " + std::to_string(id) + " is not in the training pool");
    }
    return row_[id];
}

const CandidatePair& Session::train_pair(PairId id) const {
    row_of(id);
    return data_->train[id];
}

std::span<const double> Session::features(PairId id) const { return features_.row(row_of(id)); }

double Session::lwcr_score(PairId id) const { return scores_[row_of(id)]; }

// Ranked by LWCR score, alternating between the highest and the lowest
// remaining pairs.
std::vector<PairId> Session::extreme_order() const {
    const auto ranked = rank_by_score(pool_ids_, scores_);
    std::vector<PairId> out;
    out.reserve(ranked.size());
    std::size_t lo = 0, hi = ranked.size();
    while (lo < hi) {
        out.push_back(ranked[lo++]);
        if (lo < hi) out.push_back(ranked[--hi]);
    }
    return out;
}

void Session::issue_seed_batch() {
    state_ = SessionState{};
    state_.unlabeled = pool_ids_;
    std::vector<PairId> ordered;
    if (config_.seeding == SeedingMode::lwcr) {
        auto seeds = select_initial_pool(pool_ids_, scores_, config_.init_pool);
        std::unordered_set<PairId> chosen(seeds.begin(), seeds.end());
        ordered = std::move(seeds);
        for (auto id : extreme_order()) {
            if (!chosen.contains(id)) ordered.push_back(id);
        }
    } else {
        ordered = pool_ids_;
        std::mt19937_64 rng(mix_seed(config_.seed, kSeedingStream));
        shuffle(std::span<PairId>(ordered), rng);
    }
    issue_batch(std::move(ordered), 0, config_.init_pool);
}

void Session::issue_batch(std::vector<PairId> ranked, std::size_t round, std::size_t size) {
    size = std::min(size, ranked.size());
    PendingBatch batch;
    batch.batch_id = state_.next_batch_id++;
    batch.round = round;
    batch.pairs.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(size));
    state_.reserve.assign(ranked.begin() + static_cast<std::ptrdiff_t>(size), ranked.end());
    state_.queries.push_back({batch.batch_id, round, batch.pairs});
    state_.pending = std::move(batch);
    state_.status = SessionStatus::awaiting_labels;
}

void Session::submit(std::uint64_t batch_id, std::span<const LabelSubmission> decisions) {
    if (state_.status != SessionStatus::awaiting_labels || !state_.pending) {
        throw StaleBatchError("session has no pending batch (status " + std::string(to_string(state_.status)) + ")");
    }
    auto& pending = *state_.pending;
    if (batch_id != pending.batch_id) {
        throw StaleBatchError("batch " + std::to_string(batch_id) + " is stale; pending batch is " +
                              std::to_string(pending.batch_id));
    }
    std::unordered_set<PairId> in_batch(pending.pairs.begin(), pending.pairs.end());
    std::unordered_set<PairId> seen;
    std::vector<PairId> unknown, duplicate;
    for (const auto& d : decisions) {
        if (!in_batch.contains(d.pair)) {
            unknown.push_back(d.pair);
        } else if (!seen.insert(d.pair).second) {
            duplicate.push_back(d.pair);
        }
    }
    if (!unknown.empty()) throw LabelValidationError("pairs not in the pending batch", unknown);
    if (!duplicate.empty()) throw LabelValidationError("pairs labeled more than once", duplicate);
    std::vector<PairId> missing;
    for (auto id : pending.pairs) {
        if (!seen.contains(id)) missing.push_back(id);
    }
    if (!missing.empty()) throw LabelValidationError("pairs missing a label", missing);

    // Apply in batch order so the labeled pool order does not depend on the
    // order the client listed its decisions in.
    std::vector<std::optional<Label>> by_pair(pending.pairs.size());
    for (const auto& d : decisions) {
        const auto pos = std::find(pending.pairs.begin(), pending.pairs.end(), d.pair) - pending.pairs.begin();
        by_pair[static_cast<std::size_t>(pos)] = d.label;
    }
    std::size_t skipped = 0;
    std::unordered_set<PairId> newly;
    for (std::size_t i = 0; i < pending.pairs.size(); ++i) {
        if (!by_pair[i]) {
            ++skipped;
            continue;
        }
        state_.labeled.push_back({pending.pairs[i], *by_pair[i], pending.round});
        newly.insert(pending.pairs[i]);
    }
    std::erase_if(state_.unlabeled, [&](PairId id) { return newly.contains(id); });

    const std::size_t round = pending.round;
    if (skipped > 0 && !state_.reserve.empty()) {
        std::vector<PairId> ranked = std::move(state_.reserve);
        state_.pending.reset();
        issue_batch(std::move(ranked), round, skipped);
        return;
    }
    state_.pending.reset();
    state_.reserve.clear();
    state_.iteration = round;
    advance();
}

FeatureMatrix Session::pool_matrix(std::size_t count, std::vector<Label>& labels) const {
    FeatureMatrix x(count, features_.cols());
    labels.clear();
    for (std::size_t i = 0; i < count; ++i) {
        const auto& e = state_.labeled[i];
        const auto src = features_.row(row_of(e.pair));
        std::copy(src.begin(), src.end(), x.row(i).begin());
        labels.push_back(e.label);
    }
    return x;
}

void Session::train_and_evaluate() {
    std::vector<Label> y;
    const FeatureMatrix x = pool_matrix(state_.labeled.size(), y);
    committee_ = fit_committee(x, y, config_.classifiers);
    latest_.clear();
    for (const auto& member : committee_->members) {
        latest_.push_back(config_.use_validation ? evaluate(*member, valid_x_, valid_y_) : evaluate(*member, x, y));
    }
    std::size_t best_member = 0;
    for (std::size_t i = 1; i < latest_.size(); ++i) {
        if (latest_[i].f1 > latest_[best_member].f1) best_member = i;
    }
    const double f1 = latest_[best_member].f1;
    state_.history.push_back(f1);
    if (!state_.best || f1 > state_.best->f1) {
        state_.best = BestSnapshot{best_member, state_.iteration, f1, state_.labeled.size()};
    }
}

void Session::advance() {
    state_.status = SessionStatus::training;
    bool has_match = false, has_mismatch = false;
    for (const auto& e : state_.labeled) (e.label == Label::match ? has_match : has_mismatch) = true;

    if (!(has_match && has_mismatch)) {
        // No committee can be fit yet: keep querying from both ends of the
        // LWCR ranking until both classes are present.
        std::unordered_set<PairId> unlabeled(state_.unlabeled.begin(), state_.unlabeled.end());
        std::vector<PairId> ranked;
        for (auto id : extreme_order()) {
            if (unlabeled.contains(id)) ranked.push_back(id);
        }
        if (ranked.empty()) {
            state_.status = SessionStatus::stopped;
            state_.stop_reason = StopReason::pool_exhausted;
            return;
        }
        issue_batch(std::move(ranked), state_.iteration, config_.batch);
        return;
    }

    train_and_evaluate();

    const StopPolicy policy{config_.patience, config_.min_f1, config_.max_iterations, config_.use_validation};
    const auto reason = check_stop(state_.history, state_.unlabeled.size(), policy);
    if (reason != StopReason::none) {
        state_.status = SessionStatus::stopped;
        state_.stop_reason = reason;
        return;
    }

    const auto& q = state_.unlabeled;
    FeatureMatrix qx(q.size(), features_.cols());
    for (std::size_t i = 0; i < q.size(); ++i) {
        const auto src = features_.row(row_of(q[i]));
        std::copy(src.begin(), src.end(), qx.row(i).begin());
    }
    QueryOptions options;
    options.strategy = config_.strategy;
    options.weights = config_.hybrid_weights;
    options.entropy_member = config_.entropy_member;
    options.random_seed = mix_seed(mix_seed(config_.seed, kQueryStream), state_.iteration);
    ProbMatrix probs = predict_match_probs(*committee_, qx);
    const auto scores = score_uncertainty(probs, std::min(options.entropy_member, probs.cols() - 1), options.base);
    issue_batch(rank_candidates(scores, q, options), state_.iteration + 1, config_.batch);
}

void Session::label_pending(Oracle& oracle) {
    if (state_.status != SessionStatus::awaiting_labels || !state_.pending) {
        throw SessionStateError("session is not awaiting labels");
    }
    const auto& pending = *state_.pending;
    std::vector<const CandidatePair*> pairs;
    pairs.reserve(pending.pairs.size());
    for (auto id : pending.pairs) pairs.push_back(&train_pair(id));
    std::vector<std::optional<Label>> answers;
    try {
        answers = oracle.label(pairs);
    } catch (const OracleError&) {
        throw;
    } catch (const std::exception& e) {
        throw OracleError(std::string("oracle failed: ") + e.what());
    }
    if (answers.size() != pairs.size()) {
        throw OracleError("oracle answered " + std::to_string(answers.size()) + " of " +
                          std::to_string(pairs.size()) + " pairs");
    }
    std::vector<LabelSubmission> decisions;
    decisions.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) decisions.push_back({pending.pairs[i], answers[i]});
    submit(pending.batch_id, decisions);
}

void Session::run_iteration(Oracle& oracle) {
    if (state_.status == SessionStatus::stopped) throw SessionStateError("session already stopped");
    const std::size_t before = state_.history.size();
    // Skips and degenerate-pool recovery can take several batches to complete
    // one round.
    while (state_.status == SessionStatus::awaiting_labels && state_.history.size() == before) {
        label_pending(oracle);
    }
}

void Session::run_to_completion(Oracle& oracle) {
    while (state_.status != SessionStatus::stopped) run_iteration(oracle);
}

std::unique_ptr<Classifier> Session::best_model() const {
    if (!state_.best) return nullptr;
    std::vector<Label> y;
    const FeatureMatrix x = pool_matrix(state_.best->pool_size, y);
    auto model = make_classifier(config_.classifiers.at(state_.best->member));
    model->fit(x, y);
    return model;
}

FinalReport Session::final_report() const {
    FinalReport r;
    r.best = state_.best;
    r.labels = state_.labeled.size();
    r.iterations = state_.iteration;
    r.history = state_.history;
    r.stop_reason = state_.stop_reason;
    r.prune = prune_;
    if (auto model = best_model()) {
        r.best_kind = model->kind();
        r.test = test_y_.empty() ? EvalReport{} : evaluate(*model, test_x_, test_y_);
    }
    return r;
}

Session Session::restore(std::shared_ptr<const DatasetBundle> data, SessionConfig config, SessionState state) {
    Session s(std::move(data), std::move(config), false);
    std::unordered_set<PairId> seen;
    for (const auto& e : state.labeled) {
        if (e.pair >= s.row_.size() || s.row_[e.pair] == npos || !seen.insert(e.pair).second) {
            throw SessionStateError("labeled pair " + std::to_string(e.pair) + " does not fit the training pool");
        }
    }
    for (auto id : state.unlabeled) {
        if (id >= s.row_.size() || s.row_[id] == npos || !seen.insert(id).second) {
            throw SessionStateError("unlabeled pair " + std::to_string(id) + " does not fit the training pool");
        }
    }
    if (seen.size() != s.pool_ids_.size()) {
        throw SessionStateError("labeled and unlabeled pools do not cover the training pool");
    }
    if (state.history.size() != (state.history.empty() ? 0 : state.iteration + 1)) {
        throw SessionStateError("history length does not match the iteration count");
    }
    if (state.pending) {
        std::unordered_set<PairId> q(state.unlabeled.begin(), state.unlabeled.end());
        for (auto id : state.pending->pairs) {
            if (!q.contains(id)) throw SessionStateError("pending pair " + std::to_string(id) + " is not unlabeled");
        }
    }
    if (state.status == SessionStatus::training) {
        throw SessionStateError("cannot resume a session saved mid-training");
    }
    if ((state.status == SessionStatus::awaiting_labels) != state.pending.has_value()) {
        throw SessionStateError("pending batch does not match the session status");
    }
    if (state.best && state.best->pool_size > state.labeled.size()) {
        throw SessionStateError("best snapshot refers to more labels than the session holds");
    }
    s.state_ = std::move(state);
    return s;
}

}  // namespace almatch
