#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "almatch/dataio.hpp"
#include "almatch/engine.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace almatch;

namespace {

// Answers from ground truth and remembers every id it was asked about.
class RecordingOracle : public Oracle {
public:
    std::vector<std::optional<Label>> label(std::span<const CandidatePair* const> pairs) override {
        std::vector<std::optional<Label>> out;
        for (const auto* p : pairs) {
            ++asked[p->id];
            out.push_back(p->truth);
        }
        return out;
    }
    std::map<PairId, int> asked;
};

// Skips each pair the first time it is asked, then answers truthfully.
class SkipOnceOracle : public Oracle {
public:
    std::vector<std::optional<Label>> label(std::span<const CandidatePair* const> pairs) override {
        std::vector<std::optional<Label>> out;
        for (const auto* p : pairs) {
            if (seen.insert(p->id).second && p->id % 3 == 0) {
                out.push_back(std::nullopt);
                ++skips;
            } else {
                out.push_back(p->truth);
            }
        }
        return out;
    }
    std::set<PairId> seen;
    std::size_t skips = 0;
};

class ConstantOracle : public Oracle {
public:
    std::vector<std::optional<Label>> label(std::span<const CandidatePair* const> pairs) override {
        return std::vector<std::optional<Label>>(pairs.size(), Label::mismatch);
    }
};

class BrokenOracle : public Oracle {
public:
    std::vector<std::optional<Label>> label(std::span<const CandidatePair* const>) override {
        throw std::runtime_error("annotator went home");
    }
};

std::shared_ptr<const DatasetBundle> fixture(const std::string& name) {
    static std::map<std::string, std::shared_ptr<const DatasetBundle>> cache;
    auto& slot = cache[name];
    if (!slot) slot = load_dataset(testing::data_dir() / name);
    return slot;
}

SessionConfig fixture_config(const DatasetBundle& data, std::uint64_t seed = 1) {
    auto c = resolve_config(ToolkitConfig{}, data);
    c.seed = seed;
    return c;
}

std::vector<LabelSubmission> truthful(const Session& s) {
    std::vector<LabelSubmission> out;
    for (auto id : s.state().pending->pairs) out.push_back({id, s.train_pair(id).truth});
    return out;
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("stop rule examples") {
    const StopPolicy policy{3, 0.5, 20, true};
    const std::vector<double> plateau{0.6, 0.7, 0.7, 0.7, 0.7};
    CHECK(check_stop(plateau, 10, policy) == StopReason::plateau);
    CHECK(check_stop(std::span(plateau).first(4), 10, policy) == StopReason::none);

    const std::vector<double> low(6, 0.4);
    CHECK(check_stop(low, 10, StopPolicy{3, 0.6, 20, true}) == StopReason::none);

    std::vector<double> rising;
    for (int i = 0; i <= 20; ++i) rising.push_back(0.01 * i);
    CHECK(check_stop(rising, 10, policy) == StopReason::max_iterations);
    CHECK(check_stop(std::span(rising).first(20), 10, policy) == StopReason::none);
    CHECK(check_stop(std::vector<double>(21, 0.1), 10, StopPolicy{3, 0.6, 20, true}) == StopReason::max_iterations);

    CHECK(check_stop(std::vector<double>{0.3}, 0, policy) == StopReason::pool_exhausted);
    CHECK(check_stop(plateau, 10, StopPolicy{3, 0.5, 20, false}) == StopReason::none);
    // An improvement resets the count; a later equal value does not.
    CHECK(check_stop(std::vector<double>{0.6, 0.8, 0.7, 0.8, 0.8}, 10, policy) == StopReason::plateau);
    CHECK(check_stop(std::vector<double>{0.6, 0.7, 0.7, 0.9, 0.7}, 10, policy) == StopReason::none);
}

TEST_CASE("evaluation examples and F1 consistency") {
    using L = Label;
    const std::vector<L> truth{L::match, L::mismatch, L::match, L::mismatch};
    CHECK(evaluate(truth, truth).f1 == 1.0);
    const std::vector<L> all_match(4, L::match);
    const auto half = evaluate(all_match, truth);
    CHECK(half.precision == 0.5);
    CHECK(half.recall == 1.0);
    CHECK(half.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    const std::vector<L> none(4, L::mismatch);
    const auto zero = evaluate(none, truth);
    CHECK(zero.precision == 0.0);
    CHECK(zero.recall == 0.0);
    CHECK(zero.f1 == 0.0);
    CHECK(zero.tn == 2);
    CHECK_THROWS_AS(evaluate(std::span(truth).first(3), truth), ShapeError);

    std::mt19937_64 rng(12);
    for (int i = 0; i < 1000; ++i) {
        const auto tp = uniform_index(rng, 20), fp = uniform_index(rng, 20), fn = uniform_index(rng, 20);
        const auto r = report_from_counts(tp, fp, fn, 5);
        CHECK(r.f1 == doctest::Approx(oracle::f1(tp, fp, fn)).epsilon(1e-12));
        CHECK(std::abs(r.f1 - f1_score(r.precision, r.recall)) <= 1e-12);
    }
}

TEST_CASE("configuration invariants are enforced") {
    SessionConfig c;
    c.schema = default_schema(std::vector<std::string>{"name"});
    c.lwcr = LwcrRule::uniform(c.schema);
    CHECK_NOTHROW(c.validate());
    auto field_of = [](SessionConfig bad) {
        try {
            bad.validate();
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("none");
    };
    auto odd = c;
    odd.init_pool = 5;
    CHECK(field_of(odd) == "session.init_pool");
    auto no_batch = c;
    no_batch.batch = 0;
    CHECK(field_of(no_batch) == "session.batch");
    auto no_cap = c;
    no_cap.max_iterations = 0;
    CHECK(field_of(no_cap) == "session.max_iterations");
    auto bad_l = c;
    bad_l.min_f1 = 1.5;
    CHECK(field_of(bad_l) == "session.min_f1");

    auto data = testing::threshold_dataset(20, 0, 5);
    CHECK_THROWS_AS(Session(data, SessionConfig{}), ConfigError);
}

TEST_CASE("too few pairs after pruning is an insufficient pool") {
    auto data = testing::threshold_dataset(4, 4, 4);
    SessionConfig c;
    c.pruning = false;
    CHECK_THROWS_AS(Session(data, c), InsufficientPoolError);
}

TEST_CASE("threshold fixture is learned perfectly within five iterations") {
    auto data = testing::threshold_dataset(40, 20, 20);
    SessionConfig c;
    c.seed = 3;
    Session s(data, c);
    CHECK(s.state().pending->pairs.size() == 6);
    RecordingOracle oracle;
    s.run_to_completion(oracle);
    const auto r = s.final_report();
    REQUIRE(r.best.has_value());
    CHECK(r.best->f1 == 1.0);
    CHECK(r.best->iteration <= 5);
    CHECK(r.test.f1 == 1.0);
    CHECK(r.labels == s.state().labeled.size());
}

TEST_CASE("session invariants hold on every iteration") {
    for (const char* name : {"restaurants", "restaurants_noisy", "beers_noisy"}) {
        CAPTURE(name);
        const auto data = fixture(name);
        const auto config = fixture_config(*data, 5);
        Session s(data, config);
        RecordingOracle oracle;
        const std::size_t total = s.pool_ids().size();
        double best = -1.0;
        while (s.state().status != SessionStatus::stopped) {
            s.run_iteration(oracle);
            const auto& st = s.state();
            CHECK(st.labeled.size() + st.unlabeled.size() == total);
            std::set<PairId> labeled;
            for (const auto& e : st.labeled) labeled.insert(e.pair);
            CHECK(labeled.size() == st.labeled.size());
            for (auto id : st.unlabeled) CHECK_FALSE(labeled.contains(id));
            CHECK(std::is_sorted(st.unlabeled.begin(), st.unlabeled.end()));
            CHECK(st.iteration <= config.max_iterations);
            CHECK(st.history.size() == st.iteration + 1);
            REQUIRE(st.best.has_value());
            CHECK(st.best->f1 >= best);
            best = st.best->f1;
            CHECK(st.best->f1 == *std::max_element(st.history.begin(), st.history.end()));
            for (const auto& e : s.latest_evaluations()) {
                CHECK(std::abs(report_from_counts(e.tp, e.fp, e.fn, e.tn).f1 - e.f1) <= 1e-12);
            }
            if (st.status != SessionStatus::stopped) {
                CHECK(st.pending->pairs.size() == std::min(config.batch, st.unlabeled.size()));
            }
        }
        const auto& st = s.state();
        // Never stopped below the floor unless capped or exhausted.
        if (st.best->f1 < config.min_f1) CHECK(st.stop_reason != StopReason::plateau);
        for (const auto& e : st.labeled) CHECK(oracle.asked[e.pair] == 1);
        CHECK(oracle.asked.size() == st.labeled.size());
        CHECK(st.labeled.size() == config.init_pool + st.iteration * config.batch);
    }
}

TEST_CASE("exhausting the unlabeled pool stops the session") {
    auto data = testing::threshold_dataset(9, 6, 6);
    SessionConfig c;
    c.pruning = false;
    c.batch = 20;
    Session s(data, c);
    RecordingOracle oracle;
    s.run_iteration(oracle);
    CHECK(s.state().unlabeled.size() == 3);
    REQUIRE(s.state().pending.has_value());
    CHECK(s.state().pending->pairs.size() == 3);
    s.run_to_completion(oracle);
    CHECK(s.state().unlabeled.empty());
    CHECK(s.state().labeled.size() == 9);
    CHECK(s.state().stop_reason == StopReason::pool_exhausted);
    CHECK_THROWS_AS(s.run_iteration(oracle), SessionStateError);
}

TEST_CASE("skipped pairs stay unlabeled and the batch is topped up") {
    const auto data = fixture("restaurants_noisy");
    Session s(data, fixture_config(*data));
    const auto first = *s.state().pending;
    const auto reserve = s.state().reserve;
    auto decisions = truthful(s);
    decisions[1].label.reset();
    decisions[4].label.reset();
    s.submit(first.batch_id, decisions);

    const auto& st = s.state();
    REQUIRE(st.pending.has_value());
    CHECK(st.pending->batch_id != first.batch_id);
    CHECK(st.pending->round == 0);
    CHECK(st.pending->pairs == std::vector<PairId>{reserve[0], reserve[1]});
    CHECK(st.labeled.size() == first.pairs.size() - 2);
    CHECK(std::binary_search(st.unlabeled.begin(), st.unlabeled.end(), first.pairs[1]));
    CHECK(std::binary_search(st.unlabeled.begin(), st.unlabeled.end(), first.pairs[4]));
    CHECK(st.history.empty());

    s.submit(st.pending->batch_id, truthful(s));
    CHECK(s.state().history.size() == 1);
    CHECK(s.state().labeled.size() == first.pairs.size());

    // A whole session with skips still labels every pair exactly once.
    Session t(data, fixture_config(*data, 2));
    SkipOnceOracle skipper;
    t.run_to_completion(skipper);
    CHECK(skipper.skips > 0);
    std::set<PairId> ids;
    for (const auto& e : t.state().labeled) ids.insert(e.pair);
    CHECK(ids.size() == t.state().labeled.size());
    CHECK(t.state().labeled.size() + t.state().unlabeled.size() == t.pool_ids().size());
}

TEST_CASE("submissions must match the pending batch") {
    const auto data = fixture("restaurants");
    Session s(data, fixture_config(*data));
    const auto batch = *s.state().pending;
    auto decisions = truthful(s);
    CHECK_THROWS_AS(s.submit(batch.batch_id + 1, decisions), StaleBatchError);

    auto missing = decisions;
    missing.pop_back();
    try {
        s.submit(batch.batch_id, missing);
        FAIL("expected LabelValidationError");
    } catch (const LabelValidationError& e) {
        CHECK(e.pairs() == std::vector<PairId>{batch.pairs.back()});
    }
    auto stranger = decisions;
    stranger.push_back({999999, Label::match});
    CHECK_THROWS_AS(s.submit(batch.batch_id, stranger), LabelValidationError);
    auto twice = decisions;
    twice.push_back(decisions.front());
    CHECK_THROWS_AS(s.submit(batch.batch_id, twice), LabelValidationError);
    CHECK(s.state().labeled.empty());

    // Decision order does not matter.
    auto reversed = decisions;
    std::reverse(reversed.begin(), reversed.end());
    Session t(data, fixture_config(*data));
    s.submit(batch.batch_id, decisions);
    t.submit(batch.batch_id, reversed);
    CHECK(s.state() == t.state());
    CHECK_THROWS_AS(s.submit(batch.batch_id, decisions), StaleBatchError);
}

TEST_CASE("a failing oracle leaves the batch pending") {
    const auto data = fixture("restaurants");
    Session s(data, fixture_config(*data));
    const auto before = s.state();
    BrokenOracle broken;
    CHECK_THROWS_AS(s.label_pending(broken), OracleError);
    CHECK(s.state() == before);
    RecordingOracle fine;
    CHECK_NOTHROW(s.run_iteration(fine));
}

TEST_CASE("single-class labels keep querying until the pool runs out") {
    auto data = testing::threshold_dataset(30, 10, 10);
    SessionConfig c;
    c.pruning = false;
    c.batch = 7;
    Session s(data, c);
    ConstantOracle oracle;
    s.run_to_completion(oracle);
    CHECK(s.state().stop_reason == StopReason::pool_exhausted);
    CHECK(s.state().history.empty());
    CHECK(s.state().labeled.size() == 30);
    CHECK_FALSE(s.final_report().best.has_value());
}

TEST_CASE("budget-only mode ignores the plateau and stops at the cap") {
    auto data = testing::threshold_dataset(60, 0, 20);
    SessionConfig c;
    c.use_validation = false;
    c.max_iterations = 4;
    Session s(data, c);
    RecordingOracle oracle;
    s.run_to_completion(oracle);
    CHECK(s.state().stop_reason == StopReason::max_iterations);
    CHECK(s.state().iteration == 4);
    CHECK(s.state().history.size() == 5);
}

TEST_CASE("sessions are deterministic and resumable") {
    const auto data = fixture("beers_noisy");
    const auto config = fixture_config(*data, 9);
    Session a(data, config);
    Session b(data, config);
    RecordingOracle oa, ob;
    a.run_to_completion(oa);
    b.run_to_completion(ob);
    CHECK(a.state() == b.state());
    CHECK(a.final_report().test == b.final_report().test);

    Session c(data, config);
    RecordingOracle oc;
    c.run_iteration(oc);
    c.run_iteration(oc);
    Session resumed = Session::restore(data, config, c.state());
    resumed.run_to_completion(oc);
    CHECK(resumed.state() == a.state());
    CHECK(resumed.final_report().test == a.final_report().test);
}

TEST_CASE("restore rejects states that do not fit") {
    const auto data = fixture("restaurants");
    const auto config = fixture_config(*data);
    Session s(data, config);
    RecordingOracle oracle;
    s.run_iteration(oracle);
    const auto good = s.state();
    CHECK_NOTHROW(Session::restore(data, config, good));

    auto dup = good;
    dup.unlabeled.push_back(dup.labeled.front().pair);
    CHECK_THROWS_AS(Session::restore(data, config, dup), SessionStateError);
    auto lost = good;
    lost.unlabeled.pop_back();
    if (lost.pending) std::erase(lost.pending->pairs, good.unlabeled.back());
    CHECK_THROWS_AS(Session::restore(data, config, lost), SessionStateError);
    auto history = good;
    history.history.push_back(0.5);
    CHECK_THROWS_AS(Session::restore(data, config, history), SessionStateError);
    auto training = good;
    training.status = SessionStatus::training;
    training.pending.reset();
    CHECK_THROWS_AS(Session::restore(data, config, training), SessionStateError);
    auto stray = good;
    stray.pending->pairs.push_back(good.labeled.front().pair);
    CHECK_THROWS_AS(Session::restore(data, config, stray), SessionStateError);
    auto no_batch = good;
    no_batch.pending.reset();
    CHECK_THROWS_AS(Session::restore(data, config, no_batch), SessionStateError);
}

TEST_CASE("the best member is refit on its snapshot pool") {
    const auto data = fixture("restaurants_noisy");
    Session s(data, fixture_config(*data, 4));
    RecordingOracle oracle;
    s.run_to_completion(oracle);
    const auto r = s.final_report();
    REQUIRE(r.best.has_value());
    REQUIRE(r.best_kind.has_value());
    CHECK(*r.best_kind == s.config().classifiers[r.best->member].kind);
    CHECK(r.best->pool_size <= s.state().labeled.size());
    CHECK(r.history == s.state().history);
    CHECK(r.iterations == s.state().iteration);
    const auto model = s.best_model();
    REQUIRE(model != nullptr);
    CHECK(model->kind() == *r.best_kind);
}

}
