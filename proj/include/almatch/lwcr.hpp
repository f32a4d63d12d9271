#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "almatch/errors.hpp"
#include "almatch/similarity.hpp"

namespace almatch {

/// One attribute's contribution to the linearly weighted combination rule:
/// weight * metric(left.attribute, right.attribute).
struct LwcrTerm {
    std::string attribute;
    double weight = 0.0;
    MetricKind metric = MetricKind::levenshtein;

    bool operator==(const LwcrTerm&) const = default;
};

struct LwcrRule {
    std::vector<LwcrTerm> terms;

    /// Throws ConfigError when weights are negative or do not sum to 1 (1e-9).
    void validate() const;

    /// Uniform weights, each attribute scored with the first metric the schema
    /// lists for it.
    static LwcrRule uniform(const FeatureSchema& schema);

    bool operator==(const LwcrRule&) const = default;
};

double lwcr_score(const CandidatePair& pair, const LwcrRule& rule);

/// Weighted sum over precomputed per-attribute similarities (same order as the
/// rule's terms).
double lwcr_combine(std::span<const double> similarities, const LwcrRule& rule);

struct PruneReport {
    std::size_t retained = 0;
    std::size_t removed = 0;
    std::size_t retained_matches = 0;
    std::size_t removed_matches = 0;
    bool has_truth = false;
    double threshold = 0.0;
};

struct PruneResult {
    std::vector<CandidatePair> retained;
    PruneReport report;
};

/// Keeps exactly the pairs scoring >= threshold, original order preserved.
PruneResult prune(std::span<const CandidatePair> pairs, const LwcrRule& rule, double threshold);

class InsufficientPoolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pair ids sorted by descending LWCR score, ties by ascending id.
std::vector<PairId> rank_by_score(std::span<const PairId> ids, std::span<const double> scores);

/// The size/2 highest-scoring and size/2 lowest-scoring pair ids (head first,
/// then tail in descending score order).
std::vector<PairId> select_initial_pool(std::span<const CandidatePair> pairs, const LwcrRule& rule,
                                        std::size_t size);

/// Same selection over precomputed scores.
std::vector<PairId> select_initial_pool(std::span<const PairId> ids, std::span<const double> scores,
                                        std::size_t size);

}  // namespace almatch
