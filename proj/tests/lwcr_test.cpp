#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "almatch/bench.hpp"
#include "almatch/dataio.hpp"
#include "almatch/engine.hpp"
#include "almatch/lwcr.hpp"
#include "support.hpp"

using namespace almatch;

namespace {

LwcrRule rule_of(std::vector<std::pair<std::string, double>> weights, MetricKind metric = MetricKind::levenshtein) {
    LwcrRule rule;
    for (auto& [name, w] : weights) rule.terms.push_back({name, w, metric});
    return rule;
}

}  // namespace

TEST_SUITE("lwcr") {

TEST_CASE("weighted sum examples") {
    const auto rule = rule_of({{"a", 0.5}, {"b", 0.5}});
    const double sims[] = {0.8, 0.4};
    CHECK(lwcr_combine(sims, rule) == doctest::Approx(0.6).epsilon(1e-12));
    const double zeros[] = {0.0, 0.0};
    CHECK(lwcr_combine(zeros, rule) == 0.0);
    const double one[] = {0.8};
    CHECK_THROWS_AS(lwcr_combine(one, rule), ConfigError);

    const auto l = testing::record("l", {{"a", "same"}, {"b", "value"}});
    const auto r = testing::record("r", {{"a", "same"}, {"b", "value"}});
    const CandidatePair p{0, &l, &r, std::nullopt};
    CHECK(lwcr_score(p, rule_of({{"a", 0.3}, {"b", 0.7}})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lwcr_score(p, rule_of({{"a", 1.0}, {"b", 0.0}})) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weights must be non-negative and sum to one") {
    CHECK_NOTHROW(rule_of({{"a", 0.25}, {"b", 0.75}}).validate());
    CHECK_THROWS_AS(rule_of({{"a", 0.45}, {"b", 0.45}}).validate(), ConfigError);
    CHECK_THROWS_AS(rule_of({{"a", 1.5}, {"b", -0.5}}).validate(), ConfigError);
    CHECK_THROWS_AS(LwcrRule{}.validate(), ConfigError);
    try {
        rule_of({{"a", 0.45}, {"b", 0.45}}).validate();
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("LwcrWeights") != std::string::npos);
    }
}

TEST_CASE("uniform rule uses each attribute's first metric") {
    const FeatureSchema schema{{{"x", {MetricKind::jaro_winkler, MetricKind::levenshtein}},
                                {"y", {MetricKind::exact}},
                                {"z", {MetricKind::jaccard_token}},
                                {"w", {MetricKind::levenshtein}}}};
    const auto rule = LwcrRule::uniform(schema);
    REQUIRE(rule.terms.size() == 4);
    CHECK(rule.terms[0].metric == MetricKind::jaro_winkler);
    CHECK(rule.terms[1].metric == MetricKind::exact);
    for (const auto& t : rule.terms) CHECK(t.weight == 0.25);
    CHECK_NOTHROW(rule.validate());
}

TEST_CASE("score is monotone in each attribute similarity") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + uniform_index(rng, 6);
        std::vector<double> w(n);
        double sum = 0.0;
        for (auto& x : w) sum += (x = uniform_unit(rng));
        LwcrRule rule;
        for (std::size_t i = 0; i < n; ++i) rule.terms.push_back({"a" + std::to_string(i), w[i] / sum});
        std::vector<double> sims(n);
        for (auto& s : sims) s = uniform_unit(rng);
        const double base = lwcr_combine(sims, rule);
        CHECK(base >= 0.0);
        CHECK(base <= 1.0);
        const std::size_t k = uniform_index(rng, n);
        sims[k] = sims[k] + (1.0 - sims[k]) * uniform_unit(rng);
        CHECK(lwcr_combine(sims, rule) >= base);
    }
}

TEST_CASE("prune keeps exactly the pairs at or above the threshold") {
    // Scores are 1 - edits/10 by construction.
    const auto data = testing::threshold_dataset(10, 0, 0);
    const auto rule = rule_of({{"name", 1.0}});
    const auto result = prune(data->train, rule, 0.5);
    std::vector<PairId> expected;
    for (const auto& p : data->train) {
        const std::size_t edits = (p.id * 7) % 11;
        if (edits <= 5) expected.push_back(p.id);
    }
    std::vector<PairId> got;
    for (const auto& p : result.retained) got.push_back(p.id);
    CHECK(got == expected);
    CHECK(result.report.retained == expected.size());
    CHECK(result.report.removed == 10 - expected.size());
    CHECK(result.report.has_truth);
    CHECK(result.report.removed_matches == 0);

    CHECK(prune(data->train, rule, 0.0).retained.size() == 10);
}

TEST_CASE("pruning is monotone in the threshold") {
    const auto data = load_dataset(testing::data_dir() / "restaurants_noisy");
    const auto rule = LwcrRule::uniform(default_schema(data->attributes));
    std::size_t previous = data->train.size() + 1;
    for (double theta = 0.0; theta <= 1.0; theta += 0.05) {
        const auto kept = prune(data->train, rule, theta).retained.size();
        CHECK(kept <= previous);
        previous = kept;
    }
}

TEST_CASE("default threshold retains at least 95% of matches on the bundled fixtures") {
    for (const auto& f : bundled_fixtures()) {
        const auto data = load_dataset(testing::data_dir() / f.name);
        const auto rule = LwcrRule::uniform(default_schema(data->attributes));
        const auto report = prune(data->train, rule, SessionConfig{}.prune_threshold).report;
        const auto matches = report.retained_matches + report.removed_matches;
        CAPTURE(f.name);
        REQUIRE(matches > 0);
        CHECK(static_cast<double>(report.retained_matches) >= 0.95 * static_cast<double>(matches));
    }
}

TEST_CASE("initial pool takes the head and the tail of the ranking") {
    const std::vector<PairId> ids{10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
    const std::vector<double> scores{0.5, 0.9, 0.1, 0.7, 0.3, 0.8, 0.2, 0.6, 0.4, 0.0};
    CHECK(select_initial_pool(ids, scores, 4) == std::vector<PairId>{11, 15, 12, 19});
    const auto all = select_initial_pool(ids, scores, 10);
    CHECK(std::set<PairId>(all.begin(), all.end()).size() == 10);
    CHECK_THROWS_AS(select_initial_pool(ids, scores, 12), InsufficientPoolError);
    CHECK_THROWS_AS(select_initial_pool(ids, scores, 3), InsufficientPoolError);
    CHECK_THROWS_AS(select_initial_pool(ids, scores, 0), InsufficientPoolError);
}

TEST_CASE("initial pool properties on random scores") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 40);
        std::vector<PairId> ids(n);
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            ids[i] = 3 * i + uniform_index(rng, 3);
            // Coarse scores so ties occur.
            scores[i] = static_cast<double>(uniform_index(rng, 6)) / 5.0;
        }
        const std::size_t size = 2 * (1 + uniform_index(rng, n / 2));
        const auto pool = select_initial_pool(ids, scores, size);
        REQUIRE(pool.size() == size);
        CHECK(std::set<PairId>(pool.begin(), pool.end()).size() == size);

        auto score_of = [&](PairId id) { return scores[std::find(ids.begin(), ids.end(), id) - ids.begin()]; };
        double head_min = 1.0, tail_max = 0.0;
        for (std::size_t i = 0; i < size / 2; ++i) head_min = std::min(head_min, score_of(pool[i]));
        for (std::size_t i = size / 2; i < size; ++i) tail_max = std::max(tail_max, score_of(pool[i]));
        CHECK(head_min >= tail_max);

        // Against a full-sort oracle with the id tie-break.
        std::vector<std::pair<double, PairId>> order;
        for (std::size_t i = 0; i < n; ++i) order.push_back({-scores[i], ids[i]});
        std::sort(order.begin(), order.end());
        std::vector<PairId> expected;
        for (std::size_t i = 0; i < size / 2; ++i) expected.push_back(order[i].second);
        for (std::size_t i = n - size / 2; i < n; ++i) expected.push_back(order[i].second);
        CHECK(pool == expected);
    }
}

}
