#include "almatch/committee.hpp"

#include <algorithm>
#include <cmath>

namespace almatch {

FeatureMatrix FeatureMatrix::from_rows(std::span<const FeatureVector> rows) {
    FeatureMatrix m(0, rows.empty() ? 0 : rows.front().size());
    for (const auto& r : rows) m.append_row(r);
    return m;
}

void FeatureMatrix::append_row(std::span<const double> values) {
    if (rows_ == 0 && data_.empty()) cols_ = values.size();
    if (values.size() != cols_) {
        throw ShapeError("row has " + std::to_string(values.size()) + " components, matrix has " +
                         std::to_string(cols_));
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
    FeatureMatrix out(0, cols_);
    out.data_.reserve(indices.size() * cols_);
    for (auto i : indices) out.append_row(row(i));
    return out;
}

std::string_view to_string(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::gaussian_nb: return "gaussian_nb";
        case ClassifierKind::knn: return "knn";
        case ClassifierKind::random_forest: return "random_forest";
        case ClassifierKind::logistic_regression: return "logistic_regression";
    }
    return "unknown";
}

std::optional<ClassifierKind> parse_classifier_kind(std::string_view name) {
    for (auto kind : {ClassifierKind::gaussian_nb, ClassifierKind::knn, ClassifierKind::random_forest,
                      ClassifierKind::logistic_regression}) {
        if (to_string(kind) == name) return kind;
    }
    return std::nullopt;
}

void ClassifierSpec::validate(const std::string& field) const {
    auto positive = [&](bool ok, const char* name) {
        if (!ok) throw ConfigError(field + "." + name, "must be positive");
    };
    switch (kind) {
        case ClassifierKind::gaussian_nb:
            positive(var_smoothing > 0 && std::isfinite(var_smoothing), "var_smoothing");
            break;
        case ClassifierKind::knn: positive(k > 0, "k"); break;
        case ClassifierKind::random_forest:
            positive(trees > 0, "trees");
            positive(!max_depth || *max_depth > 0, "max_depth");
            positive(!max_features || *max_features > 0, "max_features");
            positive(min_leaf > 0, "min_leaf");
            break;
        case ClassifierKind::logistic_regression:
            positive(l2 > 0 && std::isfinite(l2), "l2");
            positive(step_size > 0 && std::isfinite(step_size), "step_size");
            positive(max_steps > 0, "max_steps");
            break;
    }
}

std::vector<ClassifierSpec> default_classifier_specs() {
    std::vector<ClassifierSpec> specs(4);
    specs[0].kind = ClassifierKind::gaussian_nb;
    specs[1].kind = ClassifierKind::knn;
    specs[2].kind = ClassifierKind::random_forest;
    specs[3].kind = ClassifierKind::logistic_regression;
    return specs;
}

TrainedCommittee fit_committee(const FeatureMatrix& x, std::span<const Label> y,
                               std::span<const ClassifierSpec> specs) {
    if (x.rows() != y.size()) throw ShapeError("feature rows and labels differ in count");
    if (specs.empty()) throw ConfigError("classifiers", "committee needs at least one member");
    const auto matches = std::count(y.begin(), y.end(), Label::match);
    if (matches == 0 || static_cast<std::size_t>(matches) == y.size()) {
        throw DegeneratePoolError("labeled pool of " + std::to_string(y.size()) +
                                  " examples contains only one class");
    }
    TrainedCommittee committee;
    committee.pool_size = y.size();
    committee.specs.assign(specs.begin(), specs.end());
    for (const auto& spec : specs) {
        auto member = make_classifier(spec);
        member->fit(x, y);
        committee.members.push_back(std::move(member));
    }
    return committee;
}

TrainedCommittee fit_committee(std::span<const LabeledExample> pool, std::span<const ClassifierSpec> specs) {
    FeatureMatrix x;
    std::vector<Label> y;
    for (const auto& ex : pool) {
        x.append_row(ex.features);
        y.push_back(ex.label);
    }
    return fit_committee(x, y, specs);
}

ProbMatrix predict_match_probs(const TrainedCommittee& committee, const FeatureMatrix& x) {
    ProbMatrix probs(x.rows(), committee.members.size());
    for (std::size_t c = 0; c < committee.members.size(); ++c) {
        const auto& member = *committee.members[c];
        if (x.rows() > 0 && member.dimension() != x.cols()) {
            throw ShapeError("feature vectors have " + std::to_string(x.cols()) + " components, committee expects " +
                             std::to_string(member.dimension()));
        }
        for (std::size_t r = 0; r < x.rows(); ++r) probs(r, c) = std::clamp(member.predict_match_prob(x.row(r)), 0.0, 1.0);
    }
    return probs;
}

std::vector<Label> predict_labels(const Classifier& member, const FeatureMatrix& x) {
    std::vector<Label> out;
    out.reserve(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out.push_back(member.predict_match_prob(x.row(r)) >= 0.5 ? Label::match : Label::mismatch);
    }
    return out;
}

std::vector<Label> predict_labels(const TrainedCommittee& committee, const FeatureMatrix& x, std::size_t member) {
    if (member >= committee.members.size()) {
        throw std::out_of_range("committee member index " + std::to_string(member) + " out of range");
    }
    return predict_labels(*committee.members[member], x);
}

}  // namespace almatch
