#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <unordered_set>

#include "json_codec.hpp"

namespace almatch {

using detail::Json;

namespace {

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

void check_keys(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(path.empty() ? "(root)" : path, "must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(join(path, key), "unknown key");
        }
    }
}

double as_number(const Json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
    return v;
}

std::uint64_t as_unsigned(const Json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) {
        if (j.get<std::int64_t>() < 0) throw ConfigError(path, "must be non-negative");
        return static_cast<std::uint64_t>(j.get<std::int64_t>());
    }
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (v >= 0.0 && v == std::floor(v) && v < 1.8e19) return static_cast<std::uint64_t>(v);
    }
    throw ConfigError(path, "must be a non-negative integer");
}

std::size_t as_count(const Json& j, const std::string& path) { return static_cast<std::size_t>(as_unsigned(j, path)); }

bool as_bool(const Json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path, "must be true or false");
    return j.get<bool>();
}

std::string as_string(const Json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "must be a string");
    return j.get<std::string>();
}

MetricKind as_metric(const Json& j, const std::string& path) {
    const auto name = as_string(j, path);
    const auto m = parse_metric(name);
    if (!m) {
        throw ConfigError(path, "unknown metric '" + name +
                                    "' (expected levenshtein, jaro_winkler, jaccard, jaccard_qgram or exact)");
    }
    return *m;
}

ClassifierSpec classifier_from_json(const Json& j, const std::string& path) {
    check_keys(j, path,
               {"kind", "var_smoothing", "k", "trees", "max_depth", "max_features", "min_leaf", "seed", "l2",
                "step_size", "max_steps"});
    if (!j.contains("kind")) throw ConfigError(join(path, "kind"), "is required");
    const auto name = as_string(j["kind"], join(path, "kind"));
    const auto kind = parse_classifier_kind(name);
    if (!kind) {
        throw ConfigError(join(path, "kind"), "unknown classifier '" + name +
                                                  "' (expected gaussian_nb, knn, random_forest or "
                                                  "logistic_regression)");
    }
    ClassifierSpec s;
    s.kind = *kind;
    if (j.contains("var_smoothing")) s.var_smoothing = as_number(j["var_smoothing"], join(path, "var_smoothing"));
    if (j.contains("k")) s.k = as_count(j["k"], join(path, "k"));
    if (j.contains("trees")) s.trees = as_count(j["trees"], join(path, "trees"));
    for (auto [key, field] : {std::pair{"max_depth", &s.max_depth}, std::pair{"max_features", &s.max_features}}) {
        if (j.contains(key) && !j[key].is_null()) *field = as_count(j[key], join(path, key));
    }
    if (j.contains("min_leaf")) s.min_leaf = as_count(j["min_leaf"], join(path, "min_leaf"));
    if (j.contains("seed")) s.seed = as_unsigned(j["seed"], join(path, "seed"));
    if (j.contains("l2")) s.l2 = as_number(j["l2"], join(path, "l2"));
    if (j.contains("step_size")) s.step_size = as_number(j["step_size"], join(path, "step_size"));
    if (j.contains("max_steps")) s.max_steps = as_count(j["max_steps"], join(path, "max_steps"));
    s.validate(path);
    return s;
}

Json classifier_to_json(const ClassifierSpec& s) {
    Json j;
    j["kind"] = std::string(to_string(s.kind));
    switch (s.kind) {
        case ClassifierKind::gaussian_nb: j["var_smoothing"] = s.var_smoothing; break;
        case ClassifierKind::knn: j["k"] = s.k; break;
        case ClassifierKind::random_forest:
            j["trees"] = s.trees;
            j["max_depth"] = s.max_depth ? Json(*s.max_depth) : Json(nullptr);
            j["max_features"] = s.max_features ? Json(*s.max_features) : Json(nullptr);
            j["min_leaf"] = s.min_leaf;
            j["seed"] = s.seed;
            break;
        case ClassifierKind::logistic_regression:
            j["l2"] = s.l2;
            j["step_size"] = s.step_size;
            j["max_steps"] = s.max_steps;
            break;
    }
    return j;
}

// Fields irrelevant to a kind are not serialized, so reset them before
// comparing parsed and original configs.
ClassifierSpec canonical(ClassifierSpec s) {
    ClassifierSpec c;
    c.kind = s.kind;
    switch (s.kind) {
        case ClassifierKind::gaussian_nb: c.var_smoothing = s.var_smoothing; break;
        case ClassifierKind::knn: c.k = s.k; break;
        case ClassifierKind::random_forest:
            c.trees = s.trees;
            c.max_depth = s.max_depth;
            c.max_features = s.max_features;
            c.min_leaf = s.min_leaf;
            c.seed = s.seed;
            break;
        case ClassifierKind::logistic_regression:
            c.l2 = s.l2;
            c.step_size = s.step_size;
            c.max_steps = s.max_steps;
            break;
    }
    return c;
}

DatasetScale parse_scale(const Json& j, const std::string& path) {
    const auto s = as_string(j, path);
    if (s == "small") return DatasetScale::small;
    if (s == "large") return DatasetScale::large;
    throw ConfigError(path, "must be 'small' or 'large'");
}

}  // namespace

std::string_view to_string(DatasetScale scale) { return scale == DatasetScale::small ? "small" : "large"; }

DatasetScale classify_scale(const DatasetBundle& data) {
    return data.train.size() < kLargeDatasetTrainPairs ? DatasetScale::small : DatasetScale::large;
}

namespace detail {

ToolkitConfig config_from_json(const Json& j) {
    ToolkitConfig c;
    check_keys(j, "", {"schema", "lwcr", "prune", "session", "classifiers", "output"});

    if (j.contains("schema")) {
        const auto& s = j["schema"];
        if (!s.is_array()) throw ConfigError("schema", "must be a list of {attribute, metrics} entries");
        std::unordered_set<std::string> seen;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const std::string path = "schema[" + std::to_string(i) + "]";
            check_keys(s[i], path, {"attribute", "metrics"});
            if (!s[i].contains("attribute")) throw ConfigError(path + ".attribute", "is required");
            FeatureSpec f;
            f.attribute = as_string(s[i]["attribute"], path + ".attribute");
            if (!seen.insert(f.attribute).second) throw ConfigError(path + ".attribute", "duplicate attribute");
            if (!s[i].contains("metrics") || !s[i]["metrics"].is_array() || s[i]["metrics"].empty()) {
                throw ConfigError(path + ".metrics", "must be a non-empty list");
            }
            for (std::size_t m = 0; m < s[i]["metrics"].size(); ++m) {
                f.metrics.push_back(as_metric(s[i]["metrics"][m], path + ".metrics[" + std::to_string(m) + "]"));
            }
            c.session.schema.features.push_back(std::move(f));
        }
        if (c.session.schema.features.empty()) throw ConfigError("schema", "must list at least one attribute");
    }

    if (j.contains("lwcr")) {
        const auto& l = j["lwcr"];
        check_keys(l, "lwcr", {"weights", "metrics"});
        if (l.contains("weights")) {
            if (!l["weights"].is_object()) throw ConfigError("lwcr.weights", "must map attribute names to weights");
            double sum = 0.0;
            for (const auto& [attr, w] : l["weights"].items()) {
                const double v = as_number(w, "lwcr.weights." + attr);
                if (v < 0.0) throw ConfigError("lwcr.weights." + attr, "LwcrWeights must be non-negative");
                c.lwcr_weights.emplace_back(attr, v);
                sum += v;
            }
            if (c.lwcr_weights.empty()) throw ConfigError("lwcr.weights", "must name at least one attribute");
            if (std::abs(sum - 1.0) > 1e-9) {
                throw ConfigError("lwcr.weights", "LwcrWeights must sum to 1 (got " + std::to_string(sum) + ")");
            }
        }
        if (l.contains("metrics")) {
            if (!l["metrics"].is_object()) throw ConfigError("lwcr.metrics", "must map attribute names to metrics");
            for (const auto& [attr, m] : l["metrics"].items()) {
                c.lwcr_metrics.emplace_back(attr, as_metric(m, "lwcr.metrics." + attr));
            }
        }
    }

    if (j.contains("prune")) {
        const auto& p = j["prune"];
        check_keys(p, "prune", {"enabled", "threshold"});
        if (p.contains("enabled")) c.session.pruning = as_bool(p["enabled"], "prune.enabled");
        if (p.contains("threshold")) c.session.prune_threshold = as_number(p["threshold"], "prune.threshold");
    }

    if (j.contains("session")) {
        const auto& s = j["session"];
        check_keys(s, "session",
                   {"scale", "init_pool", "batch", "max_iterations", "min_f1", "patience", "strategy",
                    "hybrid_weights", "entropy_member", "seeding", "use_validation", "seed"});
        auto& sc = c.session;
        if (s.contains("scale")) c.scale = parse_scale(s["scale"], "session.scale");
        if (s.contains("init_pool")) c.init_pool = as_count(s["init_pool"], "session.init_pool");
        if (s.contains("batch")) c.batch = as_count(s["batch"], "session.batch");
        if (s.contains("max_iterations")) sc.max_iterations = as_count(s["max_iterations"], "session.max_iterations");
        if (s.contains("min_f1")) sc.min_f1 = as_number(s["min_f1"], "session.min_f1");
        if (s.contains("patience")) sc.patience = as_count(s["patience"], "session.patience");
        if (s.contains("strategy")) {
            const auto name = as_string(s["strategy"], "session.strategy");
            const auto st = parse_strategy(name);
            if (!st) {
                throw ConfigError("session.strategy", "unknown strategy '" + name +
                                                          "' (expected entropy, ave_entropy, var_entropy, "
                                                          "var_prob, hybrid or random)");
            }
            sc.strategy = *st;
        }
        if (s.contains("hybrid_weights")) {
            const auto& h = s["hybrid_weights"];
            check_keys(h, "session.hybrid_weights", {"ave_entropy", "var_entropy", "var_prob"});
            if (h.contains("ave_entropy")) {
                sc.hybrid_weights.ave_entropy = as_number(h["ave_entropy"], "session.hybrid_weights.ave_entropy");
            }
            if (h.contains("var_entropy")) {
                sc.hybrid_weights.var_entropy = as_number(h["var_entropy"], "session.hybrid_weights.var_entropy");
            }
            if (h.contains("var_prob")) {
                sc.hybrid_weights.var_prob = as_number(h["var_prob"], "session.hybrid_weights.var_prob");
            }
        }
        if (s.contains("entropy_member")) sc.entropy_member = as_count(s["entropy_member"], "session.entropy_member");
        if (s.contains("seeding")) {
            const auto name = as_string(s["seeding"], "session.seeding");
            const auto mode = parse_seeding_mode(name);
            if (!mode) throw ConfigError("session.seeding", "must be 'lwcr' or 'random'");
            sc.seeding = *mode;
        }
        if (s.contains("use_validation")) sc.use_validation = as_bool(s["use_validation"], "session.use_validation");
        if (s.contains("seed")) sc.seed = as_unsigned(s["seed"], "session.seed");
    }

    if (j.contains("classifiers")) {
        const auto& cl = j["classifiers"];
        if (!cl.is_array() || cl.empty()) throw ConfigError("classifiers", "must be a non-empty list");
        c.session.classifiers.clear();
        for (std::size_t i = 0; i < cl.size(); ++i) {
            c.session.classifiers.push_back(classifier_from_json(cl[i], "classifiers[" + std::to_string(i) + "]"));
        }
    }

    if (j.contains("output")) {
        const auto& o = j["output"];
        check_keys(o, "output", {"report", "snapshot_dir"});
        if (o.contains("report")) c.report_path = as_string(o["report"], "output.report");
        if (o.contains("snapshot_dir")) c.snapshot_dir = as_string(o["snapshot_dir"], "output.snapshot_dir");
    }

    // Checks that do not need the dataset.
    auto probe = c.session;
    if (probe.schema.features.empty()) probe.schema.features.push_back({"_", {MetricKind::exact}});
    probe.lwcr = LwcrRule::uniform(probe.schema);
    if (c.init_pool) probe.init_pool = *c.init_pool;
    if (c.batch) probe.batch = *c.batch;
    probe.validate();
    return c;
}

Json config_to_json(const SessionConfig& c) {
    Json j;
    Json schema = Json::array();
    for (const auto& f : c.schema.features) {
        Json metrics = Json::array();
        for (auto m : f.metrics) metrics.push_back(std::string(to_string(m)));
        schema.push_back(Json{{"attribute", f.attribute}, {"metrics", metrics}});
    }
    j["schema"] = schema;
    Json weights = Json::object(), metrics = Json::object();
    for (const auto& t : c.lwcr.terms) {
        weights[t.attribute] = t.weight;
        metrics[t.attribute] = std::string(to_string(t.metric));
    }
    j["lwcr"] = Json{{"weights", weights}, {"metrics", metrics}};
    j["prune"] = Json{{"enabled", c.pruning}, {"threshold", c.prune_threshold}};
    Json s;
    s["init_pool"] = c.init_pool;
    s["batch"] = c.batch;
    s["max_iterations"] = c.max_iterations;
    s["min_f1"] = c.min_f1;
    s["patience"] = c.patience;
    s["strategy"] = std::string(to_string(c.strategy));
    s["hybrid_weights"] = Json{{"ave_entropy", c.hybrid_weights.ave_entropy},
                               {"var_entropy", c.hybrid_weights.var_entropy},
                               {"var_prob", c.hybrid_weights.var_prob}};
    s["entropy_member"] = c.entropy_member;
    s["seeding"] = std::string(to_string(c.seeding));
    s["use_validation"] = c.use_validation;
    s["seed"] = c.seed;
    j["session"] = s;
    Json cl = Json::array();
    for (const auto& spec : c.classifiers) cl.push_back(classifier_to_json(spec));
    j["classifiers"] = cl;
    return j;
}

Json config_to_json(const ToolkitConfig& c) {
    SessionConfig sc = c.session;
    Json j = config_to_json(sc);
    if (c.session.schema.features.empty()) j.erase("schema");
    Json weights = Json::object(), metrics = Json::object();
    for (const auto& [a, w] : c.lwcr_weights) weights[a] = w;
    for (const auto& [a, m] : c.lwcr_metrics) metrics[a] = std::string(to_string(m));
    j["lwcr"] = Json::object();
    if (!weights.empty()) j["lwcr"]["weights"] = weights;
    if (!metrics.empty()) j["lwcr"]["metrics"] = metrics;
    auto& s = j["session"];
    s.erase("init_pool");
    s.erase("batch");
    if (c.scale) s["scale"] = std::string(to_string(*c.scale));
    if (c.init_pool) s["init_pool"] = *c.init_pool;
    if (c.batch) s["batch"] = *c.batch;
    if (!c.report_path.empty() || !c.snapshot_dir.empty()) {
        j["output"] = Json::object();
        if (!c.report_path.empty()) j["output"]["report"] = c.report_path;
        if (!c.snapshot_dir.empty()) j["output"]["snapshot_dir"] = c.snapshot_dir;
    }
    return j;
}

SessionConfig materialize(const ToolkitConfig& c) {
    SessionConfig sc = c.session;
    if (sc.schema.features.empty()) throw ConfigError("schema", "is required");
    if (!c.init_pool) throw ConfigError("session.init_pool", "is required");
    if (!c.batch) throw ConfigError("session.batch", "is required");
    sc.init_pool = *c.init_pool;
    sc.batch = *c.batch;
    for (auto& spec : sc.classifiers) spec = canonical(spec);

    std::unordered_set<std::string> schema_attrs;
    for (const auto& f : sc.schema.features) schema_attrs.insert(f.attribute);
    auto first_metric = [&](const std::string& attr) {
        for (const auto& f : sc.schema.features) {
            if (f.attribute == attr) return f.metrics.front();
        }
        return MetricKind::levenshtein;
    };
    for (const auto& [attr, m] : c.lwcr_metrics) {
        if (!schema_attrs.contains(attr)) throw ConfigError("lwcr.metrics." + attr, "attribute is not in the schema");
    }
    sc.lwcr.terms.clear();
    if (c.lwcr_weights.empty()) {
        sc.lwcr = LwcrRule::uniform(sc.schema);
    } else {
        for (const auto& [attr, w] : c.lwcr_weights) {
            if (!schema_attrs.contains(attr)) {
                throw ConfigError("lwcr.weights." + attr, "attribute is not in the schema");
            }
            sc.lwcr.terms.push_back({attr, w, first_metric(attr)});
        }
    }
    for (auto& t : sc.lwcr.terms) {
        for (const auto& [attr, m] : c.lwcr_metrics) {
            if (attr == t.attribute) t.metric = m;
        }
    }
    sc.validate();
    return sc;
}

Json eval_to_json(const EvalReport& r) {
    return Json{{"tp", r.tp},
                {"fp", r.fp},
                {"fn", r.fn},
                {"tn", r.tn},
                {"precision", r.precision},
                {"recall", r.recall},
                {"f1", r.f1}};
}

}  // namespace detail

ToolkitConfig parse_config_text(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("(root)", std::string("invalid JSON: ") + e.what());
    }
    return detail::config_from_json(j);
}

ToolkitConfig parse_config(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw ConfigError("(file)", "config file not found: " + path.string());
    return parse_config_text(read_file(path));
}

SessionConfig resolve_config(const ToolkitConfig& config, const DatasetBundle& data) {
    ToolkitConfig c = config;
    const std::unordered_set<std::string> attrs(data.attributes.begin(), data.attributes.end());
    if (c.session.schema.features.empty()) {
        c.session.schema = default_schema(data.attributes);
    } else {
        for (std::size_t i = 0; i < c.session.schema.features.size(); ++i) {
            const auto& a = c.session.schema.features[i].attribute;
            if (!attrs.contains(a)) {
                throw ConfigError("schema[" + std::to_string(i) + "].attribute",
                                  "dataset has no attribute '" + a + "'");
            }
        }
    }
    const DatasetScale scale = c.scale.value_or(classify_scale(data));
    if (!c.init_pool) c.init_pool = scale == DatasetScale::small ? 6 : 50;
    if (!c.batch) c.batch = scale == DatasetScale::small ? 4 : 20;
    return detail::materialize(c);
}

std::string serialize_config(const SessionConfig& config) { return detail::config_to_json(config).dump(2) + "\n"; }

std::string serialize_config(const ToolkitConfig& config) { return detail::config_to_json(config).dump(2) + "\n"; }

}  // namespace almatch
