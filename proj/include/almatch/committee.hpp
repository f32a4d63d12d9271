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

#include "almatch/errors.hpp"
#include "almatch/similarity.hpp"

namespace almatch {

/// Dense row-major matrix of feature vectors.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    static FeatureMatrix from_rows(std::span<const FeatureVector> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    void append_row(std::span<const double> values);
    FeatureMatrix select_rows(std::span<const std::size_t> indices) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct LabeledExample {
    FeatureVector features;
    Label label = Label::mismatch;
};

enum class ClassifierKind : std::uint8_t { gaussian_nb, knn, random_forest, logistic_regression };

std::string_view to_string(ClassifierKind kind);
std::optional<ClassifierKind> parse_classifier_kind(std::string_view name);

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::random_forest;
    // gaussian_nb
    double var_smoothing = 1e-9;
    // knn
    std::size_t k = 5;
    // random_forest
    std::size_t trees = 100;
    std::optional<std::size_t> max_depth;        // unlimited when empty
    std::optional<std::size_t> max_features;     // ceil(sqrt(m)) when empty
    std::size_t min_leaf = 1;
    std::uint64_t seed = 42;
    // logistic_regression
    double l2 = 1e-3;
    double step_size = 1.0;  // in units of 1/L, L a bound on the gradient's Lipschitz constant
    std::size_t max_steps = 500;

    /// Throws ConfigError on non-positive hyper-parameters.
    void validate(const std::string& field) const;

    bool operator==(const ClassifierSpec&) const = default;
};

/// The four members used by default: naive Bayes, KNN, random forest and
/// logistic regression, in that order.
std::vector<ClassifierSpec> default_classifier_specs();

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual void fit(const FeatureMatrix& x, std::span<const Label> y) = 0;
    /// Probability of the match class for one feature vector.
    virtual double predict_match_prob(std::span<const double> x) const = 0;
    virtual ClassifierKind kind() const = 0;
    virtual std::size_t dimension() const = 0;
};

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec);

class DegeneratePoolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rows are pairs, columns committee members.
class ProbMatrix {
public:
    ProbMatrix() = default;
    ProbMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct TrainedCommittee {
    std::vector<std::shared_ptr<const Classifier>> members;
    std::vector<ClassifierSpec> specs;
    std::size_t pool_size = 0;  // number of labeled examples the members saw
};

TrainedCommittee fit_committee(const FeatureMatrix& x, std::span<const Label> y,
                               std::span<const ClassifierSpec> specs);
TrainedCommittee fit_committee(std::span<const LabeledExample> pool, std::span<const ClassifierSpec> specs);

ProbMatrix predict_match_probs(const TrainedCommittee& committee, const FeatureMatrix& x);

/// Label 1 iff the member's match probability is >= 0.5.
std::vector<Label> predict_labels(const TrainedCommittee& committee, const FeatureMatrix& x, std::size_t member);
std::vector<Label> predict_labels(const Classifier& member, const FeatureMatrix& x);

/// Mean log-loss plus (l2 / 2) * |w|^2 (bias unregularized). Weights are
/// laid out as [w_0 .. w_{m-1}, bias].
double logistic_objective(std::span<const double> weights, const FeatureMatrix& x, std::span<const Label> y,
                          double l2);
std::vector<double> logistic_gradient(std::span<const double> weights, const FeatureMatrix& x,
                                      std::span<const Label> y, double l2);

}  // namespace almatch
