#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "almatch/committee.hpp"
#include "almatch/rng.hpp"

using namespace almatch;

namespace {

ClassifierSpec spec_of(ClassifierKind kind) {
    ClassifierSpec s;
    s.kind = kind;
    return s;
}

constexpr ClassifierKind kAllKinds[] = {ClassifierKind::gaussian_nb, ClassifierKind::knn,
                                        ClassifierKind::random_forest, ClassifierKind::logistic_regression};

struct Sample {
    FeatureMatrix x;
    std::vector<Label> y;
};

// Two isotropic Gaussian clusters in [0,1]^2, centres (0.25, 0.25) and
// (0.75, 0.75), spread 0.06: about six standard deviations apart.
Sample clusters(std::size_t per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.06);
    Sample s;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const bool match = i % 2 == 1;
        const double c = match ? 0.75 : 0.25;
        const double row[] = {std::clamp(c + noise(rng), 0.0, 1.0), std::clamp(c + noise(rng), 0.0, 1.0)};
        s.x.append_row(row);
        s.y.push_back(match ? Label::match : Label::mismatch);
    }
    return s;
}

double accuracy(const Classifier& c, const Sample& s) {
    const auto predicted = predict_labels(c, s.x);
    std::size_t right = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) right += predicted[i] == s.y[i];
    return static_cast<double>(right) / static_cast<double>(predicted.size());
}

class FixedProbability final : public Classifier {
public:
    explicit FixedProbability(double p) : p_(p) {}
    void fit(const FeatureMatrix&, std::span<const Label>) override {}
    double predict_match_prob(std::span<const double>) const override { return p_; }
    ClassifierKind kind() const override { return ClassifierKind::knn; }
    std::size_t dimension() const override { return 1; }

private:
    double p_;
};

}  // namespace

TEST_SUITE("committee") {

TEST_CASE("default committee has four members in a fixed order") {
    const auto specs = default_classifier_specs();
    REQUIRE(specs.size() == 4);
    CHECK(specs[0].kind == ClassifierKind::gaussian_nb);
    CHECK(specs[1].kind == ClassifierKind::knn);
    CHECK(specs[1].k == 5);
    CHECK(specs[2].kind == ClassifierKind::random_forest);
    CHECK(specs[2].trees == 100);
    CHECK(specs[3].kind == ClassifierKind::logistic_regression);
    const auto train = clusters(10, 1);
    const auto committee = fit_committee(train.x, train.y, specs);
    CHECK(committee.members.size() == 4);
    CHECK(committee.pool_size == 20);
}

TEST_CASE("every member separates well-separated clusters") {
    const auto train = clusters(20, 11);
    const auto held_out = clusters(50, 12);
    for (auto kind : kAllKinds) {
        CAPTURE(to_string(kind));
        auto c = make_classifier(spec_of(kind));
        c->fit(train.x, train.y);
        CHECK(accuracy(*c, held_out) >= 0.95);
        CHECK(accuracy(*c, train) == 1.0);
    }
}

TEST_CASE("single-class pools are rejected") {
    FeatureMatrix x;
    std::vector<Label> y;
    for (int i = 0; i < 6; ++i) {
        const double row[] = {0.1 * i, 0.2};
        x.append_row(row);
        y.push_back(Label::mismatch);
    }
    CHECK_THROWS_AS(fit_committee(x, y, default_classifier_specs()), DegeneratePoolError);
}

TEST_CASE("probabilities stay in [0, 1] and wrong dimensions are refused") {
    const auto train = clusters(15, 3);
    const auto committee = fit_committee(train.x, train.y, default_classifier_specs());
    std::mt19937_64 rng(4);
    FeatureMatrix queries;
    for (int i = 0; i < 200; ++i) {
        const double row[] = {uniform_unit(rng) * 3 - 1, uniform_unit(rng) * 3 - 1};
        queries.append_row(row);
    }
    const auto probs = predict_match_probs(committee, queries);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        for (std::size_t c = 0; c < probs.cols(); ++c) {
            CHECK(probs(r, c) >= 0.0);
            CHECK(probs(r, c) <= 1.0);
        }
    }
    FeatureMatrix wide(1, 3);
    CHECK_THROWS_AS(predict_match_probs(committee, wide), ShapeError);
    CHECK_THROWS_AS(predict_labels(committee, queries, 4), std::out_of_range);
}

TEST_CASE("knn probability is the matched fraction of the k nearest neighbours") {
    // Distances from the origin: 0.1, 0.2, 0.3, 0.4, 0.5 (labels 1,1,1,0,0),
    // then farther points labelled 1 that must not count.
    const double dist[] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.9, 1.0, 1.1};
    const Label labels[] = {Label::match, Label::match, Label::match, Label::mismatch,
                            Label::mismatch, Label::match, Label::match, Label::match};
    FeatureMatrix x;
    std::vector<Label> y(std::begin(labels), std::end(labels));
    for (double d : dist) {
        const double row[] = {d, 0.0};
        x.append_row(row);
    }
    auto knn = make_classifier(spec_of(ClassifierKind::knn));
    knn->fit(x, y);
    const double origin[] = {0.0, 0.0};
    CHECK(knn->predict_match_prob(origin) == doctest::Approx(0.6));

    // Brute-force neighbour enumeration for random queries.
    std::mt19937_64 rng(8);
    for (int i = 0; i < 200; ++i) {
        const double q[] = {uniform_unit(rng) * 1.2, uniform_unit(rng) * 0.5};
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            d.push_back({std::hypot(x(r, 0) - q[0], x(r, 1) - q[1]), r});
        }
        std::sort(d.begin(), d.end());
        double matched = 0;
        for (int k = 0; k < 5; ++k) matched += y[d[static_cast<std::size_t>(k)].second] == Label::match;
        CHECK(knn->predict_match_prob(q) == doctest::Approx(matched / 5.0));
    }

    // A query equal to a training point present k times with label 1.
    FeatureMatrix dup;
    std::vector<Label> dup_y;
    for (int i = 0; i < 5; ++i) {
        const double row[] = {0.5, 0.5};
        dup.append_row(row);
        dup_y.push_back(Label::match);
    }
    for (int i = 0; i < 5; ++i) {
        const double row[] = {0.9, 0.1 * i};
        dup.append_row(row);
        dup_y.push_back(Label::mismatch);
    }
    knn->fit(dup, dup_y);
    const double same[] = {0.5, 0.5};
    CHECK(knn->predict_match_prob(same) == 1.0);
}

TEST_CASE("labels threshold the match probability at 0.5 inclusive") {
    FeatureMatrix one(1, 1);
    CHECK(predict_labels(FixedProbability(0.7), one)[0] == Label::match);
    CHECK(predict_labels(FixedProbability(0.5), one)[0] == Label::match);
    CHECK(predict_labels(FixedProbability(0.2), one)[0] == Label::mismatch);
}

TEST_CASE("logistic gradient matches central finite differences") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 5 + uniform_index(rng, 20);
        const std::size_t m = 1 + uniform_index(rng, 6);
        FeatureMatrix x(n, m);
        std::vector<Label> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < m; ++c) x(r, c) = uniform_unit(rng);
            y[r] = uniform_index(rng, 2) ? Label::match : Label::mismatch;
        }
        std::vector<double> w(m + 1);
        for (auto& v : w) v = uniform_unit(rng) * 4 - 2;
        const double l2 = 1e-3 + uniform_unit(rng);
        const auto grad = logistic_gradient(w, x, y, l2);
        REQUIRE(grad.size() == m + 1);
        double diff = 0.0, norm = 0.0;
        const double h = 1e-6;
        for (std::size_t i = 0; i <= m; ++i) {
            auto up = w, down = w;
            up[i] += h;
            down[i] -= h;
            const double fd = (logistic_objective(up, x, y, l2) - logistic_objective(down, x, y, l2)) / (2 * h);
            diff += (grad[i] - fd) * (grad[i] - fd);
            norm += fd * fd;
        }
        CHECK(std::sqrt(diff) <= 1e-5 * std::max(std::sqrt(norm), 1e-8));
    }
}

TEST_CASE("naive Bayes stays finite on zero-variance features") {
    FeatureMatrix x;
    std::vector<Label> y;
    for (int i = 0; i < 12; ++i) {
        const bool match = i % 3 == 0;
        // Column 0 constant everywhere, column 1 constant within each class,
        // column 2 varies.
        const double row[] = {0.5, match ? 1.0 : 0.0, 0.05 * i};
        x.append_row(row);
        y.push_back(match ? Label::match : Label::mismatch);
    }
    auto nb = make_classifier(spec_of(ClassifierKind::gaussian_nb));
    nb->fit(x, y);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 500; ++i) {
        const double q[] = {uniform_unit(rng), uniform_unit(rng), uniform_unit(rng) * 10 - 5};
        const double p = nb->predict_match_prob(q);
        CHECK(std::isfinite(p));
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
    FeatureMatrix constant(6, 2);
    std::vector<Label> mixed{Label::match, Label::mismatch, Label::match, Label::mismatch, Label::match,
                             Label::mismatch};
    nb->fit(constant, mixed);
    const double q[] = {0.0, 0.0};
    CHECK(nb->predict_match_prob(q) == doctest::Approx(0.5));
}

TEST_CASE("random forest is reproducible and averages tree votes") {
    const auto train = clusters(25, 21);
    auto spec = spec_of(ClassifierKind::random_forest);
    auto a = make_classifier(spec);
    auto b = make_classifier(spec);
    a->fit(train.x, train.y);
    b->fit(train.x, train.y);
    std::mt19937_64 rng(6);
    for (int i = 0; i < 300; ++i) {
        const double q[] = {uniform_unit(rng), uniform_unit(rng)};
        const double pa = a->predict_match_prob(q);
        const double pb = b->predict_match_prob(q);
        CHECK(std::memcmp(&pa, &pb, sizeof pa) == 0);
        // Distinct training points and min leaf 1 make every leaf pure, so
        // the mean over T trees is a multiple of 1/T.
        const double votes = pa * static_cast<double>(spec.trees);
        CHECK(std::abs(votes - std::round(votes)) < 1e-9);
    }
}

TEST_CASE("hyper-parameters must be positive") {
    auto s = spec_of(ClassifierKind::knn);
    s.k = 0;
    CHECK_THROWS_AS(s.validate("classifiers[1]"), ConfigError);
    s = spec_of(ClassifierKind::random_forest);
    s.trees = 0;
    CHECK_THROWS_AS(s.validate("classifiers[2]"), ConfigError);
    s = spec_of(ClassifierKind::logistic_regression);
    s.l2 = 0.0;
    try {
        s.validate("classifiers[3]");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "classifiers[3].l2");
    }
    for (auto kind : kAllKinds) CHECK(parse_classifier_kind(to_string(kind)) == kind);
}

}
