#include <fstream>
#include <random>

#include "json_codec.hpp"

namespace almatch {

using detail::Json;

namespace {

Json ids_to_json(const std::vector<PairId>& ids) {
    Json a = Json::array();
    for (auto id : ids) a.push_back(id);
    return a;
}

std::vector<PairId> ids_from_json(const Json& j) {
    std::vector<PairId> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(v.get<PairId>());
    return out;
}

Json state_to_json(const SessionState& s) {
    Json j;
    Json labeled = Json::array();
    for (const auto& e : s.labeled) labeled.push_back(Json::array({e.pair, static_cast<int>(e.label), e.round}));
    j["labeled"] = labeled;
    j["unlabeled"] = ids_to_json(s.unlabeled);
    j["iteration"] = s.iteration;
    j["history"] = s.history;
    if (s.best) {
        j["best"] = Json{{"member", s.best->member},
                         {"iteration", s.best->iteration},
                         {"f1", s.best->f1},
                         {"pool_size", s.best->pool_size}};
    } else {
        j["best"] = nullptr;
    }
    j["status"] = std::string(to_string(s.status));
    j["stop_reason"] = std::string(to_string(s.stop_reason));
    if (s.pending) {
        j["pending"] = Json{{"batch_id", s.pending->batch_id},
                            {"round", s.pending->round},
                            {"pairs", ids_to_json(s.pending->pairs)}};
    } else {
        j["pending"] = nullptr;
    }
    j["reserve"] = ids_to_json(s.reserve);
    Json queries = Json::array();
    for (const auto& q : s.queries) {
        queries.push_back(Json{{"batch_id", q.batch_id}, {"round", q.round}, {"pairs", ids_to_json(q.pairs)}});
    }
    j["queries"] = queries;
    j["next_batch_id"] = s.next_batch_id;
    return j;
}

SessionState state_from_json(const Json& j) {
    SessionState s;
    for (const auto& e : j.at("labeled")) {
        const int label = e.at(1).get<int>();
        if (label != 0 && label != 1) throw SnapshotError("labeled entry has an invalid label");
        s.labeled.push_back({e.at(0).get<PairId>(), static_cast<Label>(label), e.at(2).get<std::size_t>()});
    }
    s.unlabeled = ids_from_json(j.at("unlabeled"));
    s.iteration = j.at("iteration").get<std::size_t>();
    s.history = j.at("history").get<std::vector<double>>();
    if (!j.at("best").is_null()) {
        const auto& b = j.at("best");
        s.best = BestSnapshot{b.at("member").get<std::size_t>(), b.at("iteration").get<std::size_t>(),
                              b.at("f1").get<double>(), b.at("pool_size").get<std::size_t>()};
    }
    const auto status = parse_session_status(j.at("status").get<std::string>());
    const auto reason = parse_stop_reason(j.at("stop_reason").get<std::string>());
    if (!status || !reason) throw SnapshotError("unknown session status or stop reason");
    s.status = *status;
    s.stop_reason = *reason;
    if (!j.at("pending").is_null()) {
        const auto& p = j.at("pending");
        s.pending = PendingBatch{p.at("batch_id").get<std::uint64_t>(), p.at("round").get<std::size_t>(),
                                 ids_from_json(p.at("pairs"))};
    }
    s.reserve = ids_from_json(j.at("reserve"));
    for (const auto& q : j.at("queries")) {
        s.queries.push_back(
            {q.at("batch_id").get<std::uint64_t>(), q.at("round").get<std::size_t>(), ids_from_json(q.at("pairs"))});
    }
    s.next_batch_id = j.at("next_batch_id").get<std::uint64_t>();
    return s;
}

}  // namespace

std::string serialize_snapshot(const SessionSnapshot& snap) {
    Json j;
    j["format"] = std::string(kSnapshotFormat);
    j["version"] = kSnapshotVersion;
    j["session_id"] = snap.session_id;
    j["dataset"] = snap.dataset;
    j["created_at"] = snap.created_at;
    j["config"] = detail::config_to_json(snap.config);
    j["state"] = state_to_json(snap.state);
    return j.dump(2) + "\n";
}

SessionSnapshot parse_snapshot(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SnapshotError(std::string("snapshot is corrupt or truncated: ") + e.what());
    }
    if (!j.is_object() || !j.contains("format") || j["format"] != std::string(kSnapshotFormat)) {
        throw SnapshotError("not a session snapshot");
    }
    if (!j.contains("version") || !j["version"].is_number_integer()) {
        throw SnapshotError("snapshot has no version tag");
    }
    const auto version = j["version"].get<int>();
    if (version != kSnapshotVersion) {
        throw SnapshotVersionError("snapshot version " + std::to_string(version) + " is not supported (expected " +
                                   std::to_string(kSnapshotVersion) +
                                   "); re-create the session or convert the file with a matching release");
    }
    try {
        SessionSnapshot snap;
        snap.session_id = j.at("session_id").get<std::string>();
        snap.dataset = j.at("dataset").get<std::string>();
        snap.created_at = j.at("created_at").get<std::string>();
        snap.config = detail::materialize(detail::config_from_json(j.at("config")));
        snap.state = state_from_json(j.at("state"));
        return snap;
    } catch (const nlohmann::json::exception& e) {
        throw SnapshotError(std::string("snapshot is malformed: ") + e.what());
    } catch (const ConfigError& e) {
        throw SnapshotError(std::string("snapshot config is invalid: ") + e.what());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::random_device rd;
    const fs::path tmp = path.string() + ".tmp" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot replace " + path.string() + ": " + ec.message());
    }
}

void save_snapshot(const SessionSnapshot& snapshot, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_snapshot(snapshot));
}

SessionSnapshot load_snapshot(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw SnapshotError(e.what());
    }
    return parse_snapshot(text);
}

}  // namespace almatch
