#include "almatch/service.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <random>

#include "almatch/lwcr.hpp"

namespace almatch {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSnapshotSuffix = ".snapshot.json";
constexpr std::string_view kBatchSuffix = ".batch.json";

ServiceJson value_json(const AttributeValue& v) { return v ? ServiceJson(*v) : ServiceJson(nullptr); }

ServiceJson record_json(const Record& r, const std::vector<std::string>& attributes) {
    ServiceJson attrs = ServiceJson::object();
    for (const auto& a : attributes) {
        const auto* v = r.find(a);
        attrs[a] = v ? value_json(*v) : ServiceJson(nullptr);
    }
    return ServiceJson{{"id", r.id}, {"attributes", std::move(attrs)}};
}

// One hint per attribute: the mean of that attribute's feature components.
ServiceJson hints_json(const Session& session, PairId id) {
    const auto features = session.features(id);
    ServiceJson hints = ServiceJson::object();
    std::size_t col = 0;
    for (const auto& spec : session.config().schema.features) {
        double sum = 0.0;
        for (std::size_t m = 0; m < spec.metrics.size(); ++m) sum += features[col++];
        hints[spec.attribute] = spec.metrics.empty() ? 0.0 : sum / static_cast<double>(spec.metrics.size());
    }
    return hints;
}

std::optional<std::string> string_field(const ServiceJson& j, const char* key, const std::string& path) {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_string()) throw ServiceError(400, "must be a string", path);
    return j[key].get<std::string>();
}

std::uint64_t id_field(const ServiceJson& j, const char* key, const std::string& path) {
    if (!j.contains(key)) throw ServiceError(400, "is required", path);
    if (!j[key].is_number_unsigned()) throw ServiceError(400, "must be a non-negative integer", path);
    return j[key].get<std::uint64_t>();
}

}  // namespace

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ServiceJson ServiceError::body() const {
    ServiceJson j{{"error", what()}};
    if (!field_.empty()) j["field"] = field_;
    if (!pairs_.empty()) j["pair_ids"] = pairs_;
    return j;
}

SessionService::SessionService(ServiceOptions options) : options_(std::move(options)) {
    if (!options_.snapshot_dir.empty()) fs::create_directories(options_.snapshot_dir);
}

void SessionService::register_dataset(std::shared_ptr<const DatasetBundle> data) {
    std::unique_lock lock(mutex_);
    const auto name = data->name;
    if (!datasets_.emplace(name, std::move(data)).second) {
        throw std::invalid_argument("dataset '" + name + "' is already registered");
    }
}

std::shared_ptr<const DatasetBundle> SessionService::dataset(const std::string& name) const {
    std::shared_lock lock(mutex_);
    const auto it = datasets_.find(name);
    return it == datasets_.end() ? nullptr : it->second;
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& session_id) const {
    std::shared_lock lock(mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + session_id + "'");
    return it->second;
}

std::size_t SessionService::session_count() const {
    std::shared_lock lock(mutex_);
    return sessions_.size();
}

std::string SessionService::new_session_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

void SessionService::note_batch(Entry& entry) {
    const auto& pending = entry.session->state().pending;
    const std::uint64_t id = pending ? pending->batch_id : 0;
    if (id != entry.issued_batch) {
        entry.issued_batch = id;
        entry.issued_at = pending ? utc_timestamp() : std::string();
    }
}

SessionSnapshot SessionService::snapshot_of(const Entry& entry) const {
    SessionSnapshot snap;
    snap.session_id = entry.id;
    snap.dataset = entry.session->dataset().name;
    snap.created_at = entry.created_at;
    snap.config = entry.session->config();
    snap.state = entry.session->state();
    return snap;
}

void SessionService::persist(const Entry& entry) const {
    if (options_.snapshot_dir.empty()) return;
    save_snapshot(snapshot_of(entry), options_.snapshot_dir / (entry.id + std::string(kSnapshotSuffix)));
    const ServiceJson batch{{"batch_id", entry.issued_batch}, {"issued_at", entry.issued_at}};
    write_file_atomic(options_.snapshot_dir / (entry.id + std::string(kBatchSuffix)), batch.dump(2) + "\n");
}

std::vector<std::string> SessionService::restore_sessions() {
    std::vector<std::string> problems;
    if (options_.snapshot_dir.empty() || !fs::is_directory(options_.snapshot_dir)) return problems;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(options_.snapshot_dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.ends_with(kSnapshotSuffix)) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        try {
            auto snap = load_snapshot(path);
            auto data = dataset(snap.dataset);
            if (!data) throw std::runtime_error("dataset '" + snap.dataset + "' is not registered");
            auto entry = std::make_shared<Entry>();
            entry->id = snap.session_id;
            entry->created_at = snap.created_at;
            entry->session = std::make_unique<Session>(Session::restore(data, snap.config, snap.state));
            const auto batch_file = options_.snapshot_dir / (entry->id + std::string(kBatchSuffix));
            if (fs::exists(batch_file)) {
                const auto j = ServiceJson::parse(read_file(batch_file));
                entry->issued_batch = j.at("batch_id").get<std::uint64_t>();
                entry->issued_at = j.at("issued_at").get<std::string>();
            }
            note_batch(*entry);
            std::unique_lock lock(mutex_);
            if (!sessions_.emplace(entry->id, entry).second) {
                throw std::runtime_error("duplicate session id '" + entry->id + "'");
            }
        } catch (const std::exception& e) {
            problems.push_back(path.string() + ": " + e.what());
        }
    }
    return problems;
}

ServiceJson SessionService::list_datasets() const {
    std::shared_lock lock(mutex_);
    ServiceJson list = ServiceJson::array();
    for (const auto& [name, data] : datasets_) {
        list.push_back({{"name", name},
                        {"attributes", data->attributes},
                        {"train_pairs", data->train.size()},
                        {"valid_pairs", data->valid.size()},
                        {"test_pairs", data->test.size()},
                        {"scale", std::string(to_string(classify_scale(*data)))}});
    }
    return ServiceJson{{"datasets", std::move(list)}};
}

ServiceJson SessionService::handle_json(const Entry& entry) const {
    return ServiceJson{{"session_id", entry.id},
                       {"created_at", entry.created_at},
                       {"dataset", entry.session->dataset().name},
                       {"status", std::string(to_string(entry.session->state().status))}};
}

ServiceJson SessionService::status_json(const Entry& entry) const {
    const auto& s = *entry.session;
    const auto& st = s.state();
    const auto& c = s.config();
    ServiceJson j;
    j["session_id"] = entry.id;
    j["status"] = std::string(to_string(st.status));
    j["iteration"] = st.iteration;
    j["labeled"] = st.labeled.size();
    j["unlabeled"] = st.unlabeled.size();
    j["label_budget"] = c.init_pool + c.max_iterations * c.batch;
    j["f1_history"] = st.history;
    j["best_f1"] = st.best ? ServiceJson(st.best->f1) : ServiceJson(nullptr);
    j["stop_reason"] = st.status == SessionStatus::stopped ? ServiceJson(std::string(to_string(st.stop_reason)))
                                                           : ServiceJson(nullptr);
    j["pending_batch_id"] = st.pending ? ServiceJson(st.pending->batch_id) : ServiceJson(nullptr);
    j["use_validation"] = c.use_validation;
    return j;
}

ServiceJson SessionService::create_session(const ServiceJson& request) {
    if (!request.is_object()) throw ServiceError(400, "request body must be a JSON object");
    const auto name = string_field(request, "dataset", "dataset");
    if (!name) throw ServiceError(400, "is required", "dataset");
    auto data = dataset(*name);
    if (!data) throw ServiceError(404, "unknown dataset '" + *name + "'", "dataset");

    ServiceJson overrides = request.contains("config") ? request["config"] : ServiceJson::object();
    if (!overrides.is_object()) throw ServiceError(400, "must be an object", "config");
    if (!overrides.contains("session")) overrides["session"] = ServiceJson::object();
    if (overrides["session"].is_object() && !overrides["session"].contains("use_validation")) {
        overrides["session"]["use_validation"] = false;
    }

    auto entry = std::make_shared<Entry>();
    try {
        const auto config = parse_config_text(overrides.dump());
        entry->session = std::make_unique<Session>(data, resolve_config(config, *data));
    } catch (const ConfigError& e) {
        throw ServiceError(400, e.what(), "config." + e.field());
    } catch (const InsufficientPoolError& e) {
        throw ServiceError(400, e.what(), "config");
    } catch (const SchemaError& e) {
        throw ServiceError(400, e.what(), "config.schema");
    }
    entry->created_at = utc_timestamp();
    note_batch(*entry);

    std::lock_guard guard(entry->mutex);
    while (true) {
        entry->id = new_session_id();
        std::unique_lock lock(mutex_);
        if (sessions_.emplace(entry->id, entry).second) break;
    }
    persist(*entry);
    return handle_json(*entry);
}

ServiceJson SessionService::get_batch(const std::string& session_id) {
    auto entry = find(session_id);
    std::lock_guard guard(entry->mutex);
    const auto& s = *entry->session;
    const auto& st = s.state();
    ServiceJson j;
    j["session_id"] = entry->id;
    j["status"] = std::string(to_string(st.status));
    if (!st.pending) {
        j["batch_id"] = nullptr;
        j["round"] = nullptr;
        j["issued_at"] = nullptr;
        j["pairs"] = ServiceJson::array();
        return j;
    }
    j["batch_id"] = st.pending->batch_id;
    j["round"] = st.pending->round;
    j["issued_at"] = entry->issued_at;
    ServiceJson pairs = ServiceJson::array();
    for (auto id : st.pending->pairs) {
        const auto& p = s.train_pair(id);
        pairs.push_back({{"pair_id", id},
                         {"left", record_json(*p.left, s.dataset().attributes)},
                         {"right", record_json(*p.right, s.dataset().attributes)},
                         {"hints", hints_json(s, id)}});
    }
    j["pairs"] = std::move(pairs);
    return j;
}

ServiceJson SessionService::submit_labels(const std::string& session_id, const ServiceJson& request) {
    auto entry = find(session_id);
    if (!request.is_object()) throw ServiceError(400, "request body must be a JSON object");
    const auto batch_id = id_field(request, "batch_id", "batch_id");
    if (!request.contains("labels") || !request["labels"].is_array()) {
        throw ServiceError(400, "must be an array", "labels");
    }
    std::vector<LabelSubmission> decisions;
    const auto& labels = request["labels"];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::string path = "labels[" + std::to_string(i) + "]";
        if (!labels[i].is_object()) throw ServiceError(400, "must be an object", path);
        LabelSubmission d;
        d.pair = id_field(labels[i], "pair_id", path + ".pair_id");
        const auto label = string_field(labels[i], "label", path + ".label");
        if (!label) throw ServiceError(400, "is required", path + ".label");
        if (*label == "match") {
            d.label = Label::match;
        } else if (*label == "mismatch") {
            d.label = Label::mismatch;
        } else if (*label != "skip") {
            throw ServiceError(400, "must be match, mismatch or skip", path + ".label");
        }
        decisions.push_back(d);
    }

    std::lock_guard guard(entry->mutex);
    try {
        entry->session->submit(batch_id, decisions);
    } catch (const StaleBatchError& e) {
        throw ServiceError(409, e.what(), "batch_id");
    } catch (const LabelValidationError& e) {
        throw ServiceError(400, e.what(), "labels", e.pairs());
    }
    note_batch(*entry);
    persist(*entry);
    return status_json(*entry);
}

ServiceJson SessionService::get_status(const std::string& session_id) {
    auto entry = find(session_id);
    std::lock_guard guard(entry->mutex);
    return status_json(*entry);
}

ExportArtifact SessionService::export_artifact(const std::string& session_id, std::string_view artifact) {
    auto entry = find(session_id);
    std::lock_guard guard(entry->mutex);
    if (artifact == "labeled_pool") {
        return {"text/csv", entry->id + "_labeled_pool.csv", labeled_pool_csv(*entry->session)};
    }
    if (artifact == "report") {
        return {"application/json", entry->id + "_report.json", final_report_json(*entry->session)};
    }
    if (artifact == "snapshot") {
        return {"application/json", entry->id + std::string(kSnapshotSuffix), serialize_snapshot(snapshot_of(*entry))};
    }
    throw ServiceError(404, "unknown artifact '" + std::string(artifact) + "' (labeled_pool, report, snapshot)");
}

}  // namespace almatch
