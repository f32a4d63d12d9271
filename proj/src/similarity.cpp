#include "almatch/similarity.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>

namespace almatch {

namespace {

constexpr std::array<unsigned char, 256> make_fold_table() {
    std::array<unsigned char, 256> t{};
    for (int c = 0; c < 256; ++c) {
        t[c] = static_cast<unsigned char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
    }
    return t;
}
constexpr auto fold_table = make_fold_table();

inline unsigned char fold(unsigned char c) { return fold_table[c]; }
inline unsigned char fold(char c) { return fold_table[static_cast<unsigned char>(c)]; }

constexpr std::uint64_t kSpaceBits = (std::uint64_t{1} << ' ') | (std::uint64_t{1} << '\t') |
                                     (std::uint64_t{1} << '\n') | (std::uint64_t{1} << '\v') |
                                     (std::uint64_t{1} << '\f') | (std::uint64_t{1} << '\r');

inline bool is_space(unsigned char c) { return c <= ' ' && (kSpaceBits >> c & 1u); }

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(fold(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Bit-parallel edit distance (Myers 1999, Hyyro's global-distance variant).
// Requires 1 <= |pattern| <= 64.
// Per-thread byte-indexed bit table, kept all zero between uses so a call
// only pays for the entries it touches.
std::array<std::uint64_t, 256>& zeroed_table() {
    thread_local std::array<std::uint64_t, 256> table{};
    return table;
}

template <class Map>
std::size_t myers_distance(std::string_view pattern, std::string_view text, Map map) {
    auto& peq = zeroed_table();
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        peq[map(static_cast<unsigned char>(pattern[i]))] |= std::uint64_t{1} << i;
    }

    const std::size_t m = pattern.size();
    const std::uint64_t last = std::uint64_t{1} << (m - 1);
    std::uint64_t pv = ~std::uint64_t{0};
    std::uint64_t mv = 0;
    std::size_t score = m;

    for (unsigned char c : text) {
        const std::uint64_t eq = peq[map(c)];
        const std::uint64_t xv = eq | mv;
        const std::uint64_t xh = (((eq & pv) + pv) ^ pv) | eq;
        std::uint64_t ph = mv | ~(xh | pv);
        std::uint64_t mh = pv & xh;
        score += (ph & last) != 0;
        score -= (mh & last) != 0;
        ph = (ph << 1) | 1;
        mh <<= 1;
        pv = mh | ~(xv | ph);
        mv = ph & xv;
    }
    for (unsigned char c : pattern) peq[map(c)] = 0;
    return score;
}

template <class Map>
std::size_t row_distance(std::string_view a, std::string_view b, Map map) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        const auto ca = map(static_cast<unsigned char>(a[i - 1]));
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t cost = ca == map(static_cast<unsigned char>(b[j - 1])) ? 0 : 1;
            row[j] = std::min({up + 1, row[j - 1] + 1, diag + cost});
            diag = up;
        }
    }
    return row[b.size()];
}

struct Identity {
    unsigned char operator()(unsigned char c) const { return c; }
};
struct Fold {
    unsigned char operator()(unsigned char c) const { return fold(c); }
};

template <class Map>
std::size_t distance_impl(std::string_view a, std::string_view b, Map map) {
    // A shared prefix or suffix never changes the distance.
    while (!a.empty() && !b.empty() && map(static_cast<unsigned char>(a.front())) ==
                                           map(static_cast<unsigned char>(b.front()))) {
        a.remove_prefix(1);
        b.remove_prefix(1);
    }
    while (!a.empty() && !b.empty() && map(static_cast<unsigned char>(a.back())) ==
                                           map(static_cast<unsigned char>(b.back()))) {
        a.remove_suffix(1);
        b.remove_suffix(1);
    }
    if (a.size() > b.size()) std::swap(a, b);
    if (a.empty()) return b.size();
    if (a.size() <= 64) return myers_distance(a, b, map);
    return row_distance(a, b, map);
}


// Fixed inline storage that spills to the heap past N elements.
template <class T, std::size_t N>
class InlineVec {
public:
    void push_back(const T& v) {
        if (heap_.empty() && size_ < N) {
            inline_[size_++] = v;
            return;
        }
        if (heap_.empty()) heap_.assign(inline_, inline_ + size_);
        heap_.push_back(v);
        ++size_;
    }
    T* begin() { return heap_.empty() ? inline_ : heap_.data(); }
    T* end() { return begin() + size_; }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    void resize_down(std::size_t n) {
        size_ = n;
        if (!heap_.empty()) heap_.resize(n);
    }

private:
    T inline_[N];
    std::vector<T> heap_;
    std::size_t size_ = 0;
};

// Trivially constructible view so inline token storage needs no initialization.
struct Token {
    const char* data;
    std::size_t size;
    operator std::string_view() const { return {data, size}; }
};

using TokenList = InlineVec<Token, 16>;

int folded_compare(std::string_view x, std::string_view y) {
    const std::size_t n = std::min(x.size(), y.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto cx = fold(x[i]);
        const auto cy = fold(y[i]);
        if (cx != cy) return cx < cy ? -1 : 1;
    }
    if (x.size() == y.size()) return 0;
    return x.size() < y.size() ? -1 : 1;
}

struct FoldedLess {
    bool operator()(Token x, Token y) const { return folded_compare(x, y) < 0; }
};

void split_tokens(std::string_view s, TokenList& out) {
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.push_back(Token{s.data() + start, i - start});
    }
}

void sort_unique(TokenList& v) {
    std::sort(v.begin(), v.end(), FoldedLess{});
    auto last = std::unique(v.begin(), v.end(),
                            [](Token x, Token y) { return folded_compare(x, y) == 0; });
    v.resize_down(static_cast<std::size_t>(last - v.begin()));
}

bool folded_equal(Token x, Token y) {
    if (x.size != y.size) return false;
    for (std::size_t i = 0; i < x.size; ++i) {
        if (fold(x.data[i]) != fold(y.data[i])) return false;
    }
    return true;
}

// Short lists (the common case for attribute values) skip the sort: drop
// duplicates and count common tokens by pairwise comparison.
constexpr std::size_t kPairwiseTokens = 8;

std::size_t dedupe_pairwise(TokenList& v) {
    std::size_t n = 0;
    Token* t = v.begin();
    for (std::size_t i = 0; i < v.size(); ++i) {
        bool seen = false;
        for (std::size_t k = 0; k < n && !seen; ++k) seen = folded_equal(t[k], t[i]);
        if (!seen) t[n++] = t[i];
    }
    v.resize_down(n);
    return n;
}

double set_jaccard(TokenList& x, TokenList& y) {
    if (x.size() <= kPairwiseTokens && y.size() <= kPairwiseTokens) {
        const std::size_t nx = dedupe_pairwise(x);
        const std::size_t ny = dedupe_pairwise(y);
        if (nx == 0 && ny == 0) return 1.0;
        std::size_t common = 0;
        for (const Token* i = x.begin(); i != x.end(); ++i) {
            for (const Token* j = y.begin(); j != y.end(); ++j) {
                if (folded_equal(*i, *j)) {
                    ++common;
                    break;
                }
            }
        }
        return static_cast<double>(common) / static_cast<double>(nx + ny - common);
    }
    sort_unique(x);
    sort_unique(y);
    if (x.empty() && y.empty()) return 1.0;
    std::size_t common = 0;
    auto i = x.begin();
    auto j = y.begin();
    while (i != x.end() && j != y.end()) {
        const int c = folded_compare(*i, *j);
        if (c < 0) ++i;
        else if (c > 0) ++j;
        else { ++common; ++i; ++j; }
    }
    const std::size_t uni = x.size() + y.size() - common;
    return static_cast<double>(common) / static_cast<double>(uni);
}

double jaro_from_counts(std::size_t matches, std::size_t half_transpositions, std::size_t la,
                        std::size_t lb) {
    const double m = static_cast<double>(matches);
    const double t = static_cast<double>(half_transpositions / 2);
    return (m / static_cast<double>(la) + m / static_cast<double>(lb) + (m - t) / m) / 3.0;
}

// Both strings at most 64 bytes: match flags live in bitmasks.
double jaro_short(std::string_view a, std::string_view b, std::size_t window) {
    std::uint64_t matched_a = 0;
    std::uint64_t matched_b = 0;
    std::size_t matches = 0;
    auto& positions = zeroed_table();
    unsigned char folded_b[64];
    for (std::size_t j = 0; j < b.size(); ++j) {
        folded_b[j] = fold(b[j]);
        positions[folded_b[j]] |= std::uint64_t{1} << j;
    }
    // Window of b positions [i - window, i + window]; bits past b's end are
    // never set in positions, so the upper edge needs no clamp.
    auto low_bits = [](std::size_t n) { return n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1; };
    std::uint64_t below_hi = low_bits(window + 1);
    std::uint64_t below_lo = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::uint64_t candidates = positions[fold(a[i])] & ~matched_b & below_hi & ~below_lo;
        const std::uint64_t hit = candidates != 0;
        matched_b |= candidates & (~candidates + 1);
        matched_a |= hit << i;
        matches += hit;
        below_hi = (below_hi << 1) | 1;
        if (i >= window) below_lo = (below_lo << 1) | 1;
    }
    for (std::size_t j = 0; j < b.size(); ++j) positions[folded_b[j]] = 0;
    if (matches == 0) return 0.0;

    std::size_t half_transpositions = 0;
    while (matched_a != 0) {
        const auto i = static_cast<std::size_t>(std::countr_zero(matched_a));
        const auto j = static_cast<std::size_t>(std::countr_zero(matched_b));
        half_transpositions += fold(a[i]) != folded_b[j];
        matched_a &= matched_a - 1;
        matched_b &= matched_b - 1;
    }
    return jaro_from_counts(matches, half_transpositions, a.size(), b.size());
}

double jaro_long(std::string_view a, std::string_view b, std::size_t window) {
    std::vector<unsigned char> matched_a(a.size(), 0);
    std::vector<unsigned char> matched_b(b.size(), 0);
    std::size_t matches = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t lo = i > window ? i - window : 0;
        const std::size_t hi = std::min(i + window + 1, b.size());
        const auto ca = fold(a[i]);
        for (std::size_t j = lo; j < hi; ++j) {
            if (!matched_b[j] && fold(b[j]) == ca) {
                matched_a[i] = 1;
                matched_b[j] = 1;
                ++matches;
                break;
            }
        }
    }
    if (matches == 0) return 0.0;

    std::size_t half_transpositions = 0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!matched_a[i]) continue;
        while (!matched_b[j]) ++j;
        if (fold(a[i]) != fold(b[j])) ++half_transpositions;
        ++j;
    }
    return jaro_from_counts(matches, half_transpositions, a.size(), b.size());
}

}  // namespace

const AttributeValue* Record::find(std::string_view name) const {
    for (const auto& a : attributes) {
        if (a.name == name) return &a.value;
    }
    return nullptr;
}

std::string_view to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::levenshtein: return "levenshtein";
        case MetricKind::jaro_winkler: return "jaro_winkler";
        case MetricKind::jaccard_token: return "jaccard";
        case MetricKind::jaccard_qgram: return "jaccard_qgram";
        case MetricKind::exact: return "exact";
    }
    return "unknown";
}

std::optional<MetricKind> parse_metric(std::string_view name) {
    if (name == "levenshtein" || name == "levenshtein_normalized") return MetricKind::levenshtein;
    if (name == "jaro_winkler") return MetricKind::jaro_winkler;
    if (name == "jaccard" || name == "jaccard_token") return MetricKind::jaccard_token;
    if (name == "jaccard_qgram") return MetricKind::jaccard_qgram;
    if (name == "exact") return MetricKind::exact;
    return std::nullopt;
}

std::size_t FeatureSchema::dimension() const {
    std::size_t m = 0;
    for (const auto& f : features) m += f.metrics.size();
    return m;
}

std::vector<std::string> FeatureSchema::component_names() const {
    std::vector<std::string> names;
    for (const auto& f : features) {
        for (auto kind : f.metrics) names.push_back(f.attribute + ":" + std::string(to_string(kind)));
    }
    return names;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    return distance_impl(a, b, Identity{});
}

double levenshtein_sim(std::string_view a, std::string_view b) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    const std::size_t d = distance_impl(a, b, Fold{});
    return 1.0 - static_cast<double>(d) / static_cast<double>(longest);
}

double jaro_winkler_sim(std::string_view a, std::string_view b) {
    if (a.empty() && b.empty()) return 1.0;
    if (a.empty() || b.empty()) return 0.0;

    const std::size_t longest = std::max(a.size(), b.size());
    const std::size_t window = longest / 2 > 0 ? longest / 2 - 1 : 0;
    const double jaro = longest <= 64 ? jaro_short(a, b, window) : jaro_long(a, b, window);

    std::size_t prefix = 0;
    const std::size_t cap = std::min<std::size_t>({4, a.size(), b.size()});
    while (prefix < cap && fold(a[prefix]) == fold(b[prefix])) ++prefix;
    return std::min(1.0, jaro + static_cast<double>(prefix) * 0.1 * (1.0 - jaro));
}

std::vector<std::string> token_set(std::string_view text) {
    TokenList tokens;
    split_tokens(text, tokens);
    sort_unique(tokens);
    std::vector<std::string> out;
    for (auto tok : tokens) out.push_back(lowercase(std::string_view(tok)));
    return out;
}

double jaccard_sim(std::string_view a, std::string_view b) {
    // Values without whitespace hold at most one token.
    auto single = [](std::string_view s) {
        return std::none_of(s.begin(), s.end(), [](char c) { return is_space(static_cast<unsigned char>(c)); });
    };
    if (single(a) && single(b)) {
        if (a.empty() || b.empty()) return a.empty() && b.empty() ? 1.0 : 0.0;
        return folded_equal(Token{a.data(), a.size()}, Token{b.data(), b.size()}) ? 1.0 : 0.0;
    }
    TokenList x;
    TokenList y;
    split_tokens(a, x);
    split_tokens(b, y);
    return set_jaccard(x, y);
}

double jaccard_qgram_sim(std::string_view a, std::string_view b, std::size_t q) {
    if (q == 0) q = 1;
    auto grams = [q](std::string_view s, TokenList& out) {
        if (s.empty()) return;
        if (s.size() < q) {
            out.push_back(Token{s.data(), s.size()});
            return;
        }
        for (std::size_t i = 0; i + q <= s.size(); ++i) out.push_back(Token{s.data() + i, q});
    };
    TokenList x;
    TokenList y;
    grams(a, x);
    grams(b, y);
    return set_jaccard(x, y);
}

double exact_sim(const AttributeValue& a, const AttributeValue& b) {
    if (!a || !b) return 0.0;
    return trim(*a) == trim(*b) ? 1.0 : 0.0;
}

double metric_sim(MetricKind kind, const AttributeValue& a, const AttributeValue& b) {
    if (!a || !b) return 0.0;
    switch (kind) {
        case MetricKind::levenshtein: return levenshtein_sim(*a, *b);
        case MetricKind::jaro_winkler: return jaro_winkler_sim(*a, *b);
        case MetricKind::jaccard_token: return jaccard_sim(*a, *b);
        case MetricKind::jaccard_qgram: return jaccard_qgram_sim(*a, *b);
        case MetricKind::exact: return exact_sim(a, b);
    }
    return 0.0;
}

FeatureVector vectorize(const CandidatePair& pair, const FeatureSchema& schema) {
    if (pair.left == nullptr || pair.right == nullptr) {
        throw SchemaError("candidate pair " + std::to_string(pair.id) + " has no records bound");
    }
    FeatureVector out;
    out.reserve(schema.dimension());
    for (const auto& f : schema.features) {
        const AttributeValue* l = pair.left->find(f.attribute);
        const AttributeValue* r = pair.right->find(f.attribute);
        if (l == nullptr || r == nullptr) {
            throw SchemaError("schema attribute '" + f.attribute + "' not present in record " +
                              (l == nullptr ? pair.left->id : pair.right->id));
        }
        for (auto kind : f.metrics) out.push_back(metric_sim(kind, *l, *r));
    }
    return out;
}

}  // namespace almatch
