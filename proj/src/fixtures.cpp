#include <algorithm>
#include <array>
#include <cstdio>
#include <random>
#include <set>
#include <string_view>

#include "almatch/bench.hpp"
#include "almatch/rng.hpp"

namespace almatch {

namespace {

constexpr std::array<std::string_view, 40> kNameWords = {
    "golden",  "blue",    "red",     "little",  "old",     "grand",   "royal",  "silver", "green",  "happy",
    "lucky",   "rustic",  "urban",   "coastal", "harbor",  "garden",  "corner", "village", "north", "sunset",
    "dragon",  "lotus",   "olive",   "pepper",  "saffron", "basil",   "maple",  "cedar",  "willow", "stone",
    "copper",  "iron",    "crystal", "velvet",  "bamboo",  "coral",   "ember",  "harvest", "meadow", "river"};
constexpr std::array<std::string_view, 24> kNameNouns = {
    "kitchen", "grill",  "bistro", "table",   "house",  "tavern", "diner",  "cafe",
    "oven",    "spoon",  "fork",   "lantern", "palace", "garden", "cellar", "terrace",
    "room",    "market", "bar",    "wok",     "hearth", "plate",  "pot",    "inn"};
constexpr std::array<std::string_view, 30> kSurnames = {
    "romano",  "chen",    "murphy", "garcia", "nguyen",  "kowalski", "rossi",  "patel",  "okafor", "schmidt",
    "dubois",  "tanaka",  "silva",  "novak",  "larsen",  "moreau",   "bianchi", "kim",   "haddad", "morales",
    "fischer", "santos",  "walsh",  "ivanov", "costa",   "yamamoto", "reyes",  "nakamura", "lopez", "adler"};
constexpr std::array<std::string_view, 28> kStreets = {
    "main",     "oak",      "pine",     "sunset",   "wilshire", "melrose", "broadway", "market",  "mission", "valencia",
    "lincoln",  "franklin", "highland", "vermont",  "figueroa", "olympic", "santa monica", "pico", "lexington",
    "madison",  "columbus", "amsterdam", "hudson",  "canal",    "spring",  "grand",    "la brea", "ventura"};
constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kSuffixes = {
    {{"street", "st."}, {"avenue", "ave."}, {"boulevard", "blvd."}, {"road", "rd."}, {"drive", "dr."}}};
constexpr std::array<std::pair<std::string_view, std::string_view>, 8> kCities = {{{"los angeles", "310"},
                                                                                   {"new york", "212"},
                                                                                   {"san francisco", "415"},
                                                                                   {"atlanta", "404"},
                                                                                   {"las vegas", "702"},
                                                                                   {"hollywood", "323"},
                                                                                   {"pasadena", "626"},
                                                                                   {"brooklyn", "718"}}};
constexpr std::array<std::string_view, 18> kCuisines = {
    "american", "italian",  "french",   "chinese",  "japanese", "mexican", "thai",  "indian",       "seafood",
    "steakhouses", "delis", "coffee shops", "californian", "mediterranean", "greek", "spanish", "vietnamese",
    "pizza"};

constexpr std::array<std::string_view, 20> kBeerAdjectives = {
    "hoppy", "dark",   "golden", "hazy",  "old",   "wild",   "double", "imperial", "smoked", "midnight",
    "amber", "winter", "summer", "black", "red",   "pale",   "juicy",  "bitter",   "velvet", "rusty"};
constexpr std::array<std::string_view, 20> kBeerNouns = {
    "fox",   "owl",    "river", "hammer", "anchor", "lantern", "harvest", "monk",   "rooster", "wolf",
    "comet", "barrel", "tide",  "summit", "ember",  "pilgrim", "orchard", "raven",  "bison",   "thistle"};
constexpr std::array<std::pair<std::string_view, std::string_view>, 12> kBeerStyles = {
    {{"american ipa", "india pale ale (ipa)"},
     {"american pale ale", "pale ale - american"},
     {"russian imperial stout", "imperial stout"},
     {"american porter", "porter"},
     {"hefeweizen", "german hefeweizen"},
     {"saison", "saison / farmhouse ale"},
     {"witbier", "belgian witbier"},
     {"american amber ale", "amber ale"},
     {"double ipa", "imperial ipa"},
     {"pilsner", "german pilsener"},
     {"fruit beer", "fruit / vegetable beer"},
     {"english bitter", "extra special bitter"}}};

template <class Array>
auto pick(std::mt19937_64& rng, const Array& a) {
    return a[uniform_index(rng, a.size())];
}

bool chance(std::mt19937_64& rng, double p) { return uniform_unit(rng) < p; }

std::string digits(std::mt19937_64& rng, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + uniform_index(rng, 10)));
    return s;
}

// One character-level edit at a random position (not the first character).
std::string typo(std::mt19937_64& rng, std::string s) {
    if (s.size() < 3) return s;
    const std::size_t pos = 1 + uniform_index(rng, s.size() - 1);
    switch (uniform_index(rng, 3)) {
        case 0: s[pos] = static_cast<char>('a' + uniform_index(rng, 26)); break;
        case 1: s.erase(pos, 1); break;
        default:
            if (pos + 1 < s.size()) std::swap(s[pos], s[pos + 1]);
            break;
    }
    return s;
}

struct Entity {
    std::vector<AttributeValue> values;
};

// ---- restaurants --------------------------------------------------------

const std::vector<std::string> kRestaurantAttrs = {"name", "addr", "city", "phone", "type", "class"};

std::string restaurant_name(std::mt19937_64& rng) {
    switch (uniform_index(rng, 4)) {
        case 0: return std::string(pick(rng, kNameWords)) + " " + std::string(pick(rng, kNameNouns));
        case 1: return std::string(pick(rng, kSurnames)) + "'s " + std::string(pick(rng, kNameNouns));
        case 2: return "the " + std::string(pick(rng, kNameWords)) + " " + std::string(pick(rng, kNameNouns));
        default:
            return std::string(pick(rng, kNameNouns)) + " " + std::string(pick(rng, kSurnames));
    }
}

Entity restaurant(std::mt19937_64& rng, std::size_t klass) {
    const auto city = pick(rng, kCities);
    const auto suffix = pick(rng, kSuffixes);
    Entity e;
    e.values = {restaurant_name(rng),
                std::to_string(100 + uniform_index(rng, 9800)) + " " + std::string(pick(rng, kStreets)) + " " +
                    std::string(suffix.first),
                std::string(city.first),
                std::string(city.second) + "-" + digits(rng, 3) + "-" + digits(rng, 4),
                std::string(pick(rng, kCuisines)),
                std::to_string(klass)};
    return e;
}

// Another branch of the same restaurant: same name and cuisine, different
// location.
Entity restaurant_branch(std::mt19937_64& rng, const Entity& base, std::size_t klass) {
    Entity e = restaurant(rng, klass);
    e.values[0] = base.values[0];
    e.values[4] = base.values[4];
    return e;
}

Entity restaurant_copy(std::mt19937_64& rng, const Entity& base, double p) {
    Entity e = base;
    auto& name = *e.values[0];
    if (chance(rng, p)) name = typo(rng, name);
    if (chance(rng, p)) {
        if (name.starts_with("the ")) {
            name = name.substr(4);
        } else {
            name += " restaurant";
        }
    }
    auto& addr = *e.values[1];
    if (chance(rng, p)) {
        for (const auto& [full, abbr] : kSuffixes) {
            if (addr.ends_with(full)) {
                addr = addr.substr(0, addr.size() - full.size()) + std::string(abbr);
                break;
            }
        }
    }
    if (chance(rng, p)) addr = typo(rng, addr);
    if (chance(rng, p / 2) && *e.values[2] == "new york") e.values[2] = "new york city";
    if (chance(rng, p)) {
        auto& phone = *e.values[3];
        phone[3] = '/';
    }
    if (chance(rng, p / 2)) {
        e.values[4] = *e.values[4] + " (new)";
    } else if (chance(rng, p / 4)) {
        e.values[4] = std::nullopt;
    }
    return e;
}

// Same entity described by an unrelated source: renamed, most fields absent.
Entity restaurant_noise(std::mt19937_64& rng, const Entity& base) {
    Entity e;
    e.values = {restaurant_name(rng), std::nullopt, std::nullopt, std::nullopt, std::nullopt, base.values[5]};
    return e;
}

// ---- beers ----------------------------------------------------------------

const std::vector<std::string> kBeerAttrs = {"beer_name", "brew_factory_name", "style", "abv"};

std::string brewery_name(std::mt19937_64& rng) {
    switch (uniform_index(rng, 3)) {
        case 0: return std::string(pick(rng, kSurnames)) + " brewing company";
        case 1: return std::string(pick(rng, kBeerNouns)) + " " + std::string(pick(rng, kStreets)) + " brewery";
        default: return std::string(pick(rng, kNameWords)) + " " + std::string(pick(rng, kBeerNouns)) + " ales";
    }
}

std::string abv(std::mt19937_64& rng) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f%%", 4.0 + static_cast<double>(uniform_index(rng, 80)) / 10.0);
    return buf;
}

Entity beer(std::mt19937_64& rng, const std::string& brewery) {
    const auto style = pick(rng, kBeerStyles);
    Entity e;
    e.values = {std::string(pick(rng, kBeerAdjectives)) + " " + std::string(pick(rng, kBeerNouns)) + " " +
                    std::string(style.first.substr(style.first.rfind(' ') + 1)),
                brewery, std::string(style.first), abv(rng)};
    return e;
}

Entity beer_copy(std::mt19937_64& rng, const Entity& base, double p) {
    Entity e = base;
    auto& name = *e.values[0];
    if (chance(rng, p)) name = typo(rng, name);
    if (chance(rng, p)) {
        const auto& brewery = *e.values[1];
        name = brewery.substr(0, brewery.find(' ')) + " " + name;
    }
    auto& brewery = *e.values[1];
    if (chance(rng, p) && brewery.ends_with("brewing company")) {
        brewery = brewery.substr(0, brewery.size() - 7) + "co.";
    }
    if (chance(rng, p)) {
        for (const auto& [a, b] : kBeerStyles) {
            if (*e.values[2] == a) {
                e.values[2] = std::string(b);
                break;
            }
        }
    }
    if (chance(rng, p / 2)) {
        e.values[3] = std::nullopt;
    } else if (chance(rng, p)) {
        auto& v = *e.values[3];
        v.insert(v.size() - 1, "0");
    }
    return e;
}

Entity beer_noise(std::mt19937_64& rng) {
    Entity e;
    e.values = {std::string(pick(rng, kBeerNouns)) + " " + std::string(pick(rng, kBeerAdjectives)), std::nullopt,
                std::nullopt, std::nullopt};
    return e;
}

Record to_record(const std::string& id, const std::vector<std::string>& attrs, const Entity& e) {
    Record r;
    r.id = id;
    for (std::size_t i = 0; i < attrs.size(); ++i) r.attributes.push_back({attrs[i], e.values[i]});
    return r;
}

struct PairDraft {
    std::size_t a = 0;
    std::size_t b = 0;
    Label label = Label::mismatch;
    bool noise = false;
};

}  // namespace

std::vector<FixtureSpec> bundled_fixtures() {
    std::vector<FixtureSpec> out;
    FixtureSpec restaurants;
    restaurants.name = "restaurants";
    restaurants.hard_negative_rate = 0.15;
    restaurants.seed = 7;
    out.push_back(restaurants);

    FixtureSpec noisy = restaurants;
    noisy.name = "restaurants_noisy";
    noisy.noise_matches = 3;
    noisy.entity_key = false;
    noisy.hard_negative_rate = 0.3;
    noisy.typo_rate = 0.45;
    noisy.seed = 11;
    out.push_back(noisy);

    FixtureSpec beers;
    beers.name = "beers_noisy";
    beers.domain = FixtureDomain::beers;
    beers.pairs = 450;
    beers.matches = 68;
    beers.noise_matches = 2;
    beers.hard_negative_rate = 0.3;
    beers.typo_rate = 0.4;
    beers.seed = 13;
    out.push_back(beers);
    return out;
}

std::optional<FixtureSpec> find_fixture(std::string_view name) {
    for (auto& f : bundled_fixtures()) {
        if (f.name == name) return f;
    }
    return std::nullopt;
}

std::shared_ptr<DatasetBundle> make_fixture(const FixtureSpec& spec) {
    if (spec.matches > spec.pairs || spec.noise_matches > spec.matches) {
        throw ConfigError("fixture", "match counts exceed the pair count");
    }
    std::mt19937_64 rng(mix_seed(spec.seed));
    const bool beers = spec.domain == FixtureDomain::beers;
    std::vector<std::string> attrs = beers ? kBeerAttrs : kRestaurantAttrs;
    if (!beers && !spec.entity_key) attrs.pop_back();
    const std::size_t mismatches = spec.pairs - spec.matches;

    // Entities of source A; the first `matches` of them also appear in B.
    const std::size_t a_count = spec.matches + std::max<std::size_t>(spec.matches, mismatches / 3);
    std::vector<Entity> a_entities;
    std::vector<std::string> breweries;
    for (std::size_t i = 0; i < 40; ++i) breweries.push_back(brewery_name(rng));
    for (std::size_t i = 0; i < a_count; ++i) {
        a_entities.push_back(beers ? beer(rng, breweries[uniform_index(rng, breweries.size())])
                                   : restaurant(rng, i));
    }

    std::vector<Entity> b_entities;
    std::vector<std::size_t> b_match_of;  // index into a_entities, or a_count for none
    for (std::size_t i = 0; i < spec.matches; ++i) {
        const bool noise = i < spec.noise_matches;
        if (beers) {
            b_entities.push_back(noise ? beer_noise(rng) : beer_copy(rng, a_entities[i], spec.typo_rate));
        } else {
            b_entities.push_back(noise ? restaurant_noise(rng, a_entities[i])
                                       : restaurant_copy(rng, a_entities[i], spec.typo_rate));
        }
        b_match_of.push_back(i);
    }
    // Look-alikes of A entities (hard negatives) plus unrelated B entities.
    std::vector<std::pair<std::size_t, std::size_t>> lookalikes;  // (a index, b index)
    const auto hard = static_cast<std::size_t>(static_cast<double>(mismatches) * spec.hard_negative_rate);
    for (std::size_t i = 0; i < hard; ++i) {
        const std::size_t a = uniform_index(rng, a_count);
        Entity e = beers ? beer(rng, *a_entities[a].values[1])
                         : restaurant_branch(rng, a_entities[a], a_count + b_entities.size());
        lookalikes.emplace_back(a, b_entities.size());
        b_entities.push_back(std::move(e));
        b_match_of.push_back(a_count);
    }
    const std::size_t extra_b = std::max<std::size_t>(spec.matches, mismatches / 4);
    for (std::size_t i = 0; i < extra_b; ++i) {
        b_entities.push_back(beers ? beer(rng, brewery_name(rng)) : restaurant(rng, a_count + b_entities.size()));
        b_match_of.push_back(a_count);
    }

    std::vector<PairDraft> matches, others;
    for (std::size_t i = 0; i < spec.matches; ++i) matches.push_back({i, i, Label::match, i < spec.noise_matches});
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (std::size_t i = 0; i < spec.matches; ++i) used.insert({i, i});
    for (const auto& [a, b] : lookalikes) {
        if (others.size() >= mismatches) break;
        if (used.insert({a, b}).second) others.push_back({a, b, Label::mismatch, false});
    }
    while (others.size() < mismatches) {
        const std::size_t a = uniform_index(rng, a_count);
        const std::size_t b = uniform_index(rng, b_entities.size());
        if (b_match_of[b] == a) continue;
        if (used.insert({a, b}).second) others.push_back({a, b, Label::mismatch, false});
    }

    // 6:2:2 split per class; noise matches go to train only.
    std::vector<PairDraft> train, valid, test;
    auto split = [&](std::vector<PairDraft> group) {
        shuffle(std::span<PairDraft>(group), rng);
        const std::size_t n = group.size();
        const std::size_t n_train = (n * 6 + 5) / 10;
        const std::size_t n_valid = (n * 2 + 5) / 10;
        for (std::size_t i = 0; i < n; ++i) {
            auto& dst = i < n_train ? train : (i < n_train + n_valid ? valid : test);
            dst.push_back(group[i]);
        }
    };
    std::vector<PairDraft> regular_matches;
    for (const auto& m : matches) {
        if (m.noise) {
            train.push_back(m);
        } else {
            regular_matches.push_back(m);
        }
    }
    split(std::move(regular_matches));
    split(std::move(others));
    for (auto* s : {&train, &valid, &test}) shuffle(std::span<PairDraft>(*s), rng);

    auto data = std::make_shared<DatasetBundle>();
    data->name = spec.name;
    data->attributes = attrs;
    for (std::size_t i = 0; i < a_entities.size(); ++i) {
        data->table_a.push_back(to_record("a" + std::to_string(i), attrs, a_entities[i]));
    }
    // Shuffle B so matched records are not aligned with A by position.
    std::vector<std::size_t> b_order(b_entities.size());
    for (std::size_t i = 0; i < b_order.size(); ++i) b_order[i] = i;
    shuffle(std::span<std::size_t>(b_order), rng);
    std::vector<std::size_t> b_pos(b_entities.size());
    for (std::size_t i = 0; i < b_order.size(); ++i) {
        b_pos[b_order[i]] = i;
        data->table_b.push_back(to_record("b" + std::to_string(i), attrs, b_entities[b_order[i]]));
    }
    auto materialize = [&](const std::vector<PairDraft>& drafts, std::vector<CandidatePair>& out) {
        for (const auto& d : drafts) {
            CandidatePair p;
            p.id = out.size();
            p.left = &data->table_a[d.a];
            p.right = &data->table_b[b_pos[d.b]];
            p.truth = d.label;
            out.push_back(p);
        }
    };
    materialize(train, data->train);
    materialize(valid, data->valid);
    materialize(test, data->test);
    return data;
}

}  // namespace almatch
