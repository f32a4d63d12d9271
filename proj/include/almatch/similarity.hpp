#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace almatch {

/// An attribute value; std::nullopt marks a missing value, which is distinct
/// from a present empty string.
using AttributeValue = std::optional<std::string>;

struct Attribute {
    std::string name;
    AttributeValue value;

    bool operator==(const Attribute&) const = default;
};

struct Record {
    std::string id;
    std::vector<Attribute> attributes;

    /// Returns nullptr when the record has no attribute with this name.
    const AttributeValue* find(std::string_view name) const;
};

enum class Label : std::uint8_t { mismatch = 0, match = 1 };

using PairId = std::size_t;

struct CandidatePair {
    PairId id = 0;
    const Record* left = nullptr;
    const Record* right = nullptr;
    std::optional<Label> truth;
};

enum class MetricKind : std::uint8_t {
    levenshtein,
    jaro_winkler,
    jaccard_token,
    jaccard_qgram,
    exact,
};

std::string_view to_string(MetricKind kind);
/// Accepts the canonical names plus "levenshtein_normalized" and "jaccard".
std::optional<MetricKind> parse_metric(std::string_view name);

struct FeatureSpec {
    std::string attribute;
    std::vector<MetricKind> metrics;

    bool operator==(const FeatureSpec&) const = default;
};

/// Ordered attribute -> metrics assignment. Missing values on either side of a
/// pair score 0.0 for every metric of that attribute.
struct FeatureSchema {
    std::vector<FeatureSpec> features;

    std::size_t dimension() const;
    /// Human-readable "attribute:metric" labels, one per vector component.
    std::vector<std::string> component_names() const;

    bool operator==(const FeatureSchema&) const = default;
};

using FeatureVector = std::vector<double>;

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unit-cost edit distance (insert, delete, substitute) over bytes.
std::size_t edit_distance(std::string_view a, std::string_view b);

double levenshtein_sim(std::string_view a, std::string_view b);
double jaro_winkler_sim(std::string_view a, std::string_view b);
double jaccard_sim(std::string_view a, std::string_view b);
double jaccard_qgram_sim(std::string_view a, std::string_view b, std::size_t q = 3);
double exact_sim(const AttributeValue& a, const AttributeValue& b);

/// Lowercased whitespace tokens, sorted and deduplicated.
std::vector<std::string> token_set(std::string_view text);

/// Applies one metric to a pair of attribute values, honouring the
/// missing-value policy.
double metric_sim(MetricKind kind, const AttributeValue& a, const AttributeValue& b);

FeatureVector vectorize(const CandidatePair& pair, const FeatureSchema& schema);

}  // namespace almatch
