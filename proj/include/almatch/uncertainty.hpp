#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "almatch/committee.hpp"
#include "almatch/errors.hpp"

namespace almatch {

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class Strategy : std::uint8_t { entropy, ave_entropy, var_entropy, var_prob, hybrid, random };

/// Canonical names; random is the ablation control and is not part of the
/// committee strategy sweep.
std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
/// entropy, ave_entropy, var_entropy, var_prob, hybrid.
std::span<const Strategy> committee_strategies();

enum class EntropyBase : std::uint8_t { bits, nats };

struct HybridWeights {
    double ave_entropy = 2.0;
    double var_entropy = 1.0;
    double var_prob = 1.0;

    double sum() const { return ave_entropy + var_entropy + var_prob; }
    /// Throws ConfigError if any weight is negative or all are zero.
    void validate() const;

    bool operator==(const HybridWeights&) const = default;
};

/// Binary entropy of a match probability; 0 log 0 is taken as 0.
double entropy(double p_match, EntropyBase base = EntropyBase::bits);
double ave_entropy(std::span<const double> entropies);
/// Population variance (divides by n).
double var_entropy(std::span<const double> entropies);
double var_prob(std::span<const double> probabilities);

/// Per-pair uncertainties, one entry per ProbMatrix row.
struct UncertaintyScores {
    std::vector<double> entropy;  // single designated member
    std::vector<double> ave_entropy;
    std::vector<double> var_entropy;
    std::vector<double> var_prob;
};

UncertaintyScores score_uncertainty(const ProbMatrix& probs, std::size_t entropy_member,
                                    EntropyBase base = EntropyBase::bits);

/// Ordinal ascending ranks 1..n; equal values rank by ascending id.
std::vector<std::size_t> ordinal_ranks(std::span<const double> values, std::span<const PairId> ids);
/// As above, with equal values ordered by `secondary` (ascending) before id.
std::vector<std::size_t> ordinal_ranks(std::span<const double> values, std::span<const double> secondary,
                                       std::span<const PairId> ids);

/// The variance rank tables break ties by ave_entropy before id, so a
/// unanimous committee (all variances zero) ranks exactly as ave_entropy does.
struct HybridRanks {
    std::vector<std::size_t> ave_entropy;
    std::vector<std::size_t> var_entropy;
    std::vector<std::size_t> var_prob;
    std::vector<double> hybrid;
};

HybridRanks hybrid_from_scores(const UncertaintyScores& scores, std::span<const PairId> ids,
                               const HybridWeights& weights);
std::vector<double> hybrid_scores(const ProbMatrix& probs, std::span<const PairId> ids, const HybridWeights& weights,
                                  EntropyBase base = EntropyBase::bits);

struct QueryOptions {
    Strategy strategy = Strategy::hybrid;
    HybridWeights weights;
    std::size_t entropy_member = 2;  // random forest in the default committee
    EntropyBase base = EntropyBase::bits;
    std::uint64_t random_seed = 0;
};

/// All ids ordered from most to least uncertain under the given strategy.
std::vector<PairId> rank_candidates(const UncertaintyScores& scores, std::span<const PairId> ids,
                                    const QueryOptions& options);

/// The first min(n, |ids|) entries of rank_candidates.
std::vector<PairId> select_batch(const UncertaintyScores& scores, std::span<const PairId> ids, std::size_t n,
                                 const QueryOptions& options);
std::vector<PairId> select_batch(const ProbMatrix& probs, std::span<const PairId> ids, std::size_t n,
                                 const QueryOptions& options);

}  // namespace almatch
