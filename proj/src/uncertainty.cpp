#include "almatch/uncertainty.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "almatch/rng.hpp"

namespace almatch {

namespace {

constexpr std::array<Strategy, 5> kCommitteeStrategies = {Strategy::entropy, Strategy::ave_entropy,
                                                          Strategy::var_entropy, Strategy::var_prob, Strategy::hybrid};

void require_nonempty(std::span<const double> v, const char* what) {
    if (v.empty()) throw DomainError(std::string(what) + " of an empty list");
}

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Population variance as sum_{i<j} (x_i - x_j)^2 / n^2, summed in sorted
// order. Identical inputs give exactly 0, and multisets that are reflections
// of each other over the same values (such as entropies {0, 0, 0, 1} and
// {0, 1, 1, 1}) tie exactly. Quadratic in n, which is the committee size.
double population_variance(std::span<const double> v) {
    std::vector<double> squares;
    squares.reserve(v.size() * (v.size() - 1) / 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = i + 1; j < v.size(); ++j) {
            const double d = v[i] - v[j];
            squares.push_back(d * d);
        }
    }
    std::sort(squares.begin(), squares.end());
    double s = 0.0;
    for (double x : squares) s += x;
    const double n = static_cast<double>(v.size());
    return s / (n * n);
}

// Descending by score, ties by ascending id.
std::vector<PairId> order_descending(std::span<const double> score, std::span<const PairId> ids) {
    std::vector<std::size_t> idx(ids.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return ids[a] < ids[b];
    });
    std::vector<PairId> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(ids[i]);
    return out;
}

}  // namespace

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::entropy: return "entropy";
        case Strategy::ave_entropy: return "ave_entropy";
        case Strategy::var_entropy: return "var_entropy";
        case Strategy::var_prob: return "var_prob";
        case Strategy::hybrid: return "hybrid";
        case Strategy::random: return "random";
    }
    return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
    for (auto s : {Strategy::entropy, Strategy::ave_entropy, Strategy::var_entropy, Strategy::var_prob,
                   Strategy::hybrid, Strategy::random}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

std::span<const Strategy> committee_strategies() { return kCommitteeStrategies; }

void HybridWeights::validate() const {
    for (auto [name, w] : {std::pair{"ave_entropy", ave_entropy}, std::pair{"var_entropy", var_entropy},
                           std::pair{"var_prob", var_prob}}) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ConfigError(std::string("session.hybrid_weights.") + name, "weight must be non-negative");
        }
    }
    if (sum() <= 0.0) throw ConfigError("session.hybrid_weights", "at least one hybrid weight must be positive");
}

double entropy(double p, EntropyBase base) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability " + std::to_string(p) + " outside [0, 1]");
    // Evaluate on the smaller tail so that H(p) == H(1 - p) exactly.
    const double lo = std::min(p, 1.0 - p);
    const double hi = 1.0 - lo;
    auto term = [base](double q) {
        if (q <= 0.0) return 0.0;
        return -q * (base == EntropyBase::bits ? std::log2(q) : std::log(q));
    };
    return term(lo) + term(hi);
}

double ave_entropy(std::span<const double> entropies) {
    require_nonempty(entropies, "ave_entropy");
    return mean(entropies);
}

double var_entropy(std::span<const double> entropies) {
    require_nonempty(entropies, "var_entropy");
    return population_variance(entropies);
}

double var_prob(std::span<const double> probabilities) {
    require_nonempty(probabilities, "var_prob");
    return population_variance(probabilities);
}

UncertaintyScores score_uncertainty(const ProbMatrix& probs, std::size_t entropy_member, EntropyBase base) {
    if (probs.cols() == 0) throw DomainError("probability matrix has no committee columns");
    if (entropy_member >= probs.cols()) {
        throw ConfigError("session.entropy_member", "entropy member index outside the committee");
    }
    UncertaintyScores out;
    const std::size_t n = probs.rows();
    out.entropy.resize(n);
    out.ave_entropy.resize(n);
    out.var_entropy.resize(n);
    out.var_prob.resize(n);
    // Statistics are summed in sorted order, so rows whose values differ only
    // in member order (or by p <-> 1 - p for entropies) tie exactly in either
    // base.
    std::vector<double> sorted(probs.cols());
    std::vector<double> h(probs.cols());
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = probs.row(r);
        std::copy(row.begin(), row.end(), sorted.begin());
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t c = 0; c < sorted.size(); ++c) h[c] = entropy(sorted[c], base);
        std::sort(h.begin(), h.end());
        out.entropy[r] = entropy(row[entropy_member], base);
        out.ave_entropy[r] = ave_entropy(h);
        out.var_entropy[r] = var_entropy(h);
        out.var_prob[r] = var_prob(sorted);
    }
    return out;
}

std::vector<std::size_t> ordinal_ranks(std::span<const double> values, std::span<const PairId> ids) {
    return ordinal_ranks(values, {}, ids);
}

std::vector<std::size_t> ordinal_ranks(std::span<const double> values, std::span<const double> secondary,
                                       std::span<const PairId> ids) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] < values[b];
        if (!secondary.empty() && secondary[a] != secondary[b]) return secondary[a] < secondary[b];
        return ids[a] < ids[b];
    });
    std::vector<std::size_t> ranks(values.size());
    for (std::size_t pos = 0; pos < idx.size(); ++pos) ranks[idx[pos]] = pos + 1;
    return ranks;
}

HybridRanks hybrid_from_scores(const UncertaintyScores& scores, std::span<const PairId> ids,
                               const HybridWeights& weights) {
    weights.validate();
    HybridRanks out;
    out.ave_entropy = ordinal_ranks(scores.ave_entropy, ids);
    out.var_entropy = ordinal_ranks(scores.var_entropy, scores.ave_entropy, ids);
    out.var_prob = ordinal_ranks(scores.var_prob, scores.ave_entropy, ids);
    out.hybrid.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.hybrid[i] = weights.ave_entropy * static_cast<double>(out.ave_entropy[i]) +
                        weights.var_entropy * static_cast<double>(out.var_entropy[i]) +
                        weights.var_prob * static_cast<double>(out.var_prob[i]);
    }
    return out;
}

std::vector<double> hybrid_scores(const ProbMatrix& probs, std::span<const PairId> ids, const HybridWeights& weights,
                                  EntropyBase base) {
    if (probs.rows() != ids.size()) throw ShapeError("one pair id per probability row is required");
    return hybrid_from_scores(score_uncertainty(probs, 0, base), ids, weights).hybrid;
}

std::vector<PairId> rank_candidates(const UncertaintyScores& scores, std::span<const PairId> ids,
                                    const QueryOptions& options) {
    switch (options.strategy) {
        case Strategy::entropy: return order_descending(scores.entropy, ids);
        case Strategy::ave_entropy: return order_descending(scores.ave_entropy, ids);
        case Strategy::var_entropy: return order_descending(scores.var_entropy, ids);
        case Strategy::var_prob: return order_descending(scores.var_prob, ids);
        case Strategy::hybrid: {
            const auto ranks = hybrid_from_scores(scores, ids, options.weights);
            std::vector<std::size_t> idx(ids.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                if (ranks.hybrid[a] != ranks.hybrid[b]) return ranks.hybrid[a] > ranks.hybrid[b];
                if (scores.ave_entropy[a] != scores.ave_entropy[b]) {
                    return scores.ave_entropy[a] > scores.ave_entropy[b];
                }
                return ids[a] < ids[b];
            });
            std::vector<PairId> out;
            out.reserve(idx.size());
            for (auto i : idx) out.push_back(ids[i]);
            return out;
        }
        case Strategy::random: {
            std::vector<PairId> out(ids.begin(), ids.end());
            std::sort(out.begin(), out.end());
            std::mt19937_64 rng(mix_seed(options.random_seed));
            shuffle(std::span<PairId>(out), rng);
            return out;
        }
    }
    return {};
}

std::vector<PairId> select_batch(const UncertaintyScores& scores, std::span<const PairId> ids, std::size_t n,
                                 const QueryOptions& options) {
    if (n == 0 || ids.empty()) return {};
    auto ranked = rank_candidates(scores, ids, options);
    ranked.resize(std::min(n, ranked.size()));
    return ranked;
}

std::vector<PairId> select_batch(const ProbMatrix& probs, std::span<const PairId> ids, std::size_t n,
                                 const QueryOptions& options) {
    if (probs.rows() != ids.size()) throw ShapeError("one pair id per probability row is required");
    if (n == 0 || ids.empty()) return {};
    return select_batch(score_uncertainty(probs, options.entropy_member, options.base), ids, n, options);
}

}  // namespace almatch
