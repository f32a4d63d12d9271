#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <utility>

#include "almatch/committee.hpp"
#include "almatch/rng.hpp"

namespace almatch {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void check_dimension(std::size_t expected, std::size_t got) {
    if (expected != got) {
        throw ShapeError("feature vector has " + std::to_string(got) + " components, model expects " +
                         std::to_string(expected));
    }
}

inline double is_match(Label y) { return y == Label::match ? 1.0 : 0.0; }

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

class GaussianNaiveBayes final : public Classifier {
public:
    explicit GaussianNaiveBayes(double smoothing) : smoothing_(smoothing) {}

    void fit(const FeatureMatrix& x, std::span<const Label> y) override {
        dim_ = x.cols();
        const std::size_t n = x.rows();
        std::array<double, 2> count{};
        for (auto label : y) count[static_cast<std::size_t>(label)] += 1.0;

        double max_var = 0.0;
        for (std::size_t c = 0; c < dim_; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
            max_var = std::max(max_var, var / static_cast<double>(n));
        }
        // Constant features would otherwise produce zero variances.
        const double epsilon = std::max(smoothing_ * max_var, 1e-12);

        for (std::size_t k = 0; k < 2; ++k) {
            mean_[k].assign(dim_, 0.0);
            var_[k].assign(dim_, 0.0);
            log_prior_[k] = std::log(count[k] / static_cast<double>(n));
        }
        for (std::size_t r = 0; r < n; ++r) {
            const auto k = static_cast<std::size_t>(y[r]);
            for (std::size_t c = 0; c < dim_; ++c) mean_[k][c] += x(r, c);
        }
        for (std::size_t k = 0; k < 2; ++k) {
            for (auto& m : mean_[k]) m /= count[k];
        }
        for (std::size_t r = 0; r < n; ++r) {
            const auto k = static_cast<std::size_t>(y[r]);
            for (std::size_t c = 0; c < dim_; ++c) {
                const double d = x(r, c) - mean_[k][c];
                var_[k][c] += d * d;
            }
        }
        for (std::size_t k = 0; k < 2; ++k) {
            for (auto& v : var_[k]) v = v / count[k] + epsilon;
        }
    }

    double predict_match_prob(std::span<const double> x) const override {
        check_dimension(dim_, x.size());
        std::array<double, 2> joint{};
        for (std::size_t k = 0; k < 2; ++k) {
            double ll = log_prior_[k];
            for (std::size_t c = 0; c < dim_; ++c) {
                const double d = x[c] - mean_[k][c];
                ll -= 0.5 * (kLog2Pi + std::log(var_[k][c]) + d * d / var_[k][c]);
            }
            joint[k] = ll;
        }
        return sigmoid(joint[1] - joint[0]);
    }

    ClassifierKind kind() const override { return ClassifierKind::gaussian_nb; }
    std::size_t dimension() const override { return dim_; }

private:
    double smoothing_;
    std::size_t dim_ = 0;
    std::array<std::vector<double>, 2> mean_;
    std::array<std::vector<double>, 2> var_;
    std::array<double, 2> log_prior_{};
};

class NearestNeighbors final : public Classifier {
public:
    explicit NearestNeighbors(std::size_t k) : k_(k) {}

    void fit(const FeatureMatrix& x, std::span<const Label> y) override {
        x_ = x;
        y_.assign(y.begin(), y.end());
    }

    double predict_match_prob(std::span<const double> q) const override {
        check_dimension(x_.cols(), q.size());
        std::vector<std::pair<double, std::size_t>> dist(x_.rows());
        for (std::size_t r = 0; r < x_.rows(); ++r) {
            double d = 0.0;
            const auto row = x_.row(r);
            for (std::size_t c = 0; c < q.size(); ++c) d += (row[c] - q[c]) * (row[c] - q[c]);
            dist[r] = {d, r};
        }
        const std::size_t k = std::min(k_, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        std::size_t hits = 0;
        for (std::size_t i = 0; i < k; ++i) hits += y_[dist[i].second] == Label::match ? 1 : 0;
        return static_cast<double>(hits) / static_cast<double>(k);
    }

    ClassifierKind kind() const override { return ClassifierKind::knn; }
    std::size_t dimension() const override { return x_.cols(); }

private:
    std::size_t k_;
    FeatureMatrix x_;
    std::vector<Label> y_;
};

class LogisticRegression final : public Classifier {
public:
    LogisticRegression(double l2, double step, std::size_t max_steps) : l2_(l2), step_(step), max_steps_(max_steps) {}

    void fit(const FeatureMatrix& x, std::span<const Label> y) override {
        const std::size_t m = x.cols();
        double max_norm = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double norm = 1.0;  // bias input
            for (double v : x.row(r)) norm += v * v;
            max_norm = std::max(max_norm, norm);
        }
        const double lipschitz = 0.25 * max_norm + l2_;
        const double rate = step_ / lipschitz;

        weights_.assign(m + 1, 0.0);
        for (std::size_t it = 0; it < max_steps_; ++it) {
            const auto grad = logistic_gradient(weights_, x, y, l2_);
            double norm = 0.0;
            for (std::size_t i = 0; i <= m; ++i) {
                weights_[i] -= rate * grad[i];
                norm += grad[i] * grad[i];
            }
            if (norm < 1e-20) break;
        }
    }

    double predict_match_prob(std::span<const double> x) const override {
        check_dimension(weights_.size() - 1, x.size());
        double z = weights_.back();
        for (std::size_t c = 0; c < x.size(); ++c) z += weights_[c] * x[c];
        return sigmoid(z);
    }

    ClassifierKind kind() const override { return ClassifierKind::logistic_regression; }
    std::size_t dimension() const override { return weights_.empty() ? 0 : weights_.size() - 1; }

private:
    double l2_;
    double step_;
    std::size_t max_steps_;
    std::vector<double> weights_;
};

struct TreeNode {
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    double match_fraction = 0.0;
    bool leaf = true;
};

class DecisionTree {
public:
    struct Params {
        std::size_t max_features;
        std::optional<std::size_t> max_depth;
        std::size_t min_leaf;
    };

    void fit(const FeatureMatrix& x, std::span<const Label> y, std::vector<std::size_t> sample, const Params& p,
             std::mt19937_64& rng) {
        nodes_.clear();
        build(x, y, sample, 0, p, rng);
    }

    double predict(std::span<const double> q) const {
        std::size_t at = 0;
        while (!nodes_[at].leaf) at = q[nodes_[at].feature] <= nodes_[at].threshold ? nodes_[at].left : nodes_[at].right;
        return nodes_[at].match_fraction;
    }

private:
    struct Split {
        std::size_t feature = 0;
        double threshold = 0.0;
        double impurity = std::numeric_limits<double>::infinity();
    };

    std::size_t build(const FeatureMatrix& x, std::span<const Label> y, std::vector<std::size_t>& sample,
                      std::size_t depth, const Params& p, std::mt19937_64& rng) {
        const std::size_t id = nodes_.size();
        nodes_.emplace_back();
        double matches = 0.0;
        for (auto i : sample) matches += is_match(y[i]);
        const double n = static_cast<double>(sample.size());
        nodes_[id].match_fraction = matches / n;

        const bool pure = matches == 0.0 || matches == n;
        const bool depth_capped = p.max_depth && depth >= *p.max_depth;
        if (pure || depth_capped || sample.size() < 2 * p.min_leaf) return id;

        const auto split = find_split(x, y, sample, p, rng);
        if (!std::isfinite(split.impurity)) return id;

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (auto i : sample) (x(i, split.feature) <= split.threshold ? left : right).push_back(i);
        sample.clear();
        sample.shrink_to_fit();

        nodes_[id].leaf = false;
        nodes_[id].feature = split.feature;
        nodes_[id].threshold = split.threshold;
        const std::size_t l = build(x, y, left, depth + 1, p, rng);
        const std::size_t r = build(x, y, right, depth + 1, p, rng);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    // Evaluates max_features randomly chosen features; keeps drawing further
    // features only while no valid split has been found.
    Split find_split(const FeatureMatrix& x, std::span<const Label> y, const std::vector<std::size_t>& sample,
                     const Params& p, std::mt19937_64& rng) const {
        std::vector<std::size_t> features(x.cols());
        std::iota(features.begin(), features.end(), std::size_t{0});
        shuffle(std::span<std::size_t>(features), rng);

        Split best;
        std::vector<std::pair<double, double>> column(sample.size());  // (value, is_match)
        double total_matches = 0.0;
        for (auto i : sample) total_matches += is_match(y[i]);
        const double n = static_cast<double>(sample.size());

        for (std::size_t tried = 0; tried < features.size(); ++tried) {
            if (tried >= p.max_features && std::isfinite(best.impurity)) break;
            const std::size_t f = features[tried];
            for (std::size_t k = 0; k < sample.size(); ++k) column[k] = {x(sample[k], f), is_match(y[sample[k]])};
            std::sort(column.begin(), column.end());

            double left_matches = 0.0;
            for (std::size_t k = 0; k + 1 < column.size(); ++k) {
                left_matches += column[k].second;
                if (column[k].first == column[k + 1].first) continue;
                const double nl = static_cast<double>(k + 1);
                const double nr = n - nl;
                if (nl < static_cast<double>(p.min_leaf) || nr < static_cast<double>(p.min_leaf)) continue;
                const double pl = left_matches / nl;
                const double pr = (total_matches - left_matches) / nr;
                const double gini = nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr);
                if (gini < best.impurity) {
                    best.impurity = gini;
                    best.feature = f;
                    best.threshold = 0.5 * (column[k].first + column[k + 1].first);
                }
            }
        }
        return best;
    }

    std::vector<TreeNode> nodes_;
};

class RandomForest final : public Classifier {
public:
    explicit RandomForest(const ClassifierSpec& spec) : spec_(spec) {}

    void fit(const FeatureMatrix& x, std::span<const Label> y) override {
        dim_ = x.cols();
        const std::size_t max_features =
            spec_.max_features.value_or(static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim_)))));
        const DecisionTree::Params params{std::max<std::size_t>(1, max_features), spec_.max_depth, spec_.min_leaf};

        trees_.assign(spec_.trees, DecisionTree{});
        for (std::size_t t = 0; t < spec_.trees; ++t) {
            std::mt19937_64 rng(mix_seed(spec_.seed, t));
            std::vector<std::size_t> sample(x.rows());
            for (auto& s : sample) s = uniform_index(rng, x.rows());
            trees_[t].fit(x, y, std::move(sample), params, rng);
        }
    }

    double predict_match_prob(std::span<const double> q) const override {
        check_dimension(dim_, q.size());
        double sum = 0.0;
        for (const auto& tree : trees_) sum += tree.predict(q);
        return sum / static_cast<double>(trees_.size());
    }

    ClassifierKind kind() const override { return ClassifierKind::random_forest; }
    std::size_t dimension() const override { return dim_; }

private:
    ClassifierSpec spec_;
    std::size_t dim_ = 0;
    std::vector<DecisionTree> trees_;
};

}  // namespace

double logistic_objective(std::span<const double> weights, const FeatureMatrix& x, std::span<const Label> y,
                          double l2) {
    const std::size_t m = x.cols();
    double loss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double z = weights[m];
        for (std::size_t c = 0; c < m; ++c) z += weights[c] * x(r, c);
        loss += softplus(z) - is_match(y[r]) * z;
    }
    double reg = 0.0;
    for (std::size_t c = 0; c < m; ++c) reg += weights[c] * weights[c];
    return loss / static_cast<double>(x.rows()) + 0.5 * l2 * reg;
}

std::vector<double> logistic_gradient(std::span<const double> weights, const FeatureMatrix& x,
                                      std::span<const Label> y, double l2) {
    const std::size_t m = x.cols();
    std::vector<double> grad(m + 1, 0.0);
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double z = weights[m];
        for (std::size_t c = 0; c < m; ++c) z += weights[c] * x(r, c);
        const double residual = (sigmoid(z) - is_match(y[r])) * inv_n;
        for (std::size_t c = 0; c < m; ++c) grad[c] += residual * x(r, c);
        grad[m] += residual;
    }
    for (std::size_t c = 0; c < m; ++c) grad[c] += l2 * weights[c];
    return grad;
}

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec) {
    switch (spec.kind) {
        case ClassifierKind::gaussian_nb: return std::make_unique<GaussianNaiveBayes>(spec.var_smoothing);
        case ClassifierKind::knn: return std::make_unique<NearestNeighbors>(spec.k);
        case ClassifierKind::random_forest: return std::make_unique<RandomForest>(spec);
        case ClassifierKind::logistic_regression:
            return std::make_unique<LogisticRegression>(spec.l2, spec.step_size, spec.max_steps);
    }
    throw ConfigError("classifiers.kind", "unknown classifier kind");
}

}  // namespace almatch
