#include "almatch/lwcr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace almatch {

void LwcrRule::validate() const {
    if (terms.empty()) throw ConfigError("lwcr.weights", "at least one attribute weight is required");
    double sum = 0.0;
    for (const auto& t : terms) {
        if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) {
            throw ConfigError("lwcr.weights." + t.attribute, "weight must be a finite non-negative number");
        }
        sum += t.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("lwcr.weights", "LwcrWeights must sum to 1 (got " + std::to_string(sum) + ")");
    }
}

LwcrRule LwcrRule::uniform(const FeatureSchema& schema) {
    LwcrRule rule;
    const double w = schema.features.empty() ? 0.0 : 1.0 / static_cast<double>(schema.features.size());
    for (const auto& f : schema.features) {
        rule.terms.push_back({f.attribute, w, f.metrics.empty() ? MetricKind::levenshtein : f.metrics.front()});
    }
    return rule;
}

double lwcr_score(const CandidatePair& pair, const LwcrRule& rule) {
    double score = 0.0;
    for (const auto& t : rule.terms) {
        const AttributeValue* l = pair.left->find(t.attribute);
        const AttributeValue* r = pair.right->find(t.attribute);
        if (l == nullptr || r == nullptr) {
            throw ConfigError("lwcr.weights." + t.attribute, "attribute not present in dataset records");
        }
        score += t.weight * metric_sim(t.metric, *l, *r);
    }
    return std::clamp(score, 0.0, 1.0);
}

double lwcr_combine(std::span<const double> similarities, const LwcrRule& rule) {
    if (similarities.size() != rule.terms.size()) {
        throw ConfigError("lwcr.weights", "weight count does not match attribute count");
    }
    double score = 0.0;
    for (std::size_t i = 0; i < similarities.size(); ++i) score += rule.terms[i].weight * similarities[i];
    return std::clamp(score, 0.0, 1.0);
}

PruneResult prune(std::span<const CandidatePair> pairs, const LwcrRule& rule, double threshold) {
    PruneResult out;
    out.report.threshold = threshold;
    out.report.has_truth =
        !pairs.empty() && std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.truth.has_value(); });
    for (const auto& p : pairs) {
        const bool keep = lwcr_score(p, rule) >= threshold;
        const bool is_match = p.truth && *p.truth == Label::match;
        if (keep) {
            out.retained.push_back(p);
            ++out.report.retained;
            if (is_match) ++out.report.retained_matches;
        } else {
            ++out.report.removed;
            if (is_match) ++out.report.removed_matches;
        }
    }
    return out;
}

std::vector<PairId> rank_by_score(std::span<const PairId> ids, std::span<const double> scores) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (scores[x] != scores[y]) return scores[x] > scores[y];
        return ids[x] < ids[y];
    });
    std::vector<PairId> ranked;
    ranked.reserve(ids.size());
    for (auto i : order) ranked.push_back(ids[i]);
    return ranked;
}

std::vector<PairId> select_initial_pool(std::span<const PairId> ids, std::span<const double> scores,
                                        std::size_t size) {
    if (size == 0 || size % 2 != 0) {
        throw InsufficientPoolError("initial pool size must be a positive even number (got " +
                                    std::to_string(size) + ")");
    }
    if (ids.size() < size) {
        throw InsufficientPoolError("initial pool needs " + std::to_string(size) + " pairs but only " +
                                    std::to_string(ids.size()) + " are available");
    }
    const auto ranked = rank_by_score(ids, scores);
    const std::size_t half = size / 2;
    std::vector<PairId> pool(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(half));
    pool.insert(pool.end(), ranked.end() - static_cast<std::ptrdiff_t>(half), ranked.end());
    return pool;
}

std::vector<PairId> select_initial_pool(std::span<const CandidatePair> pairs, const LwcrRule& rule,
                                        std::size_t size) {
    std::vector<PairId> ids;
    std::vector<double> scores;
    ids.reserve(pairs.size());
    scores.reserve(pairs.size());
    for (const auto& p : pairs) {
        ids.push_back(p.id);
        scores.push_back(lwcr_score(p, rule));
    }
    return select_initial_pool(ids, scores, size);
}

}  // namespace almatch
