#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "almatch/dataio.hpp"
#include "almatch/engine.hpp"

namespace httplib {
class Server;
}

namespace almatch {

using ServiceJson = nlohmann::ordered_json;

/// A request the service refuses. status() is the HTTP status to answer with.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& message, std::string field = {}, std::vector<PairId> pairs = {})
        : std::runtime_error(message), status_(status), field_(std::move(field)), pairs_(std::move(pairs)) {}
    int status() const { return status_; }
    const std::string& field() const { return field_; }
    const std::vector<PairId>& pairs() const { return pairs_; }

    /// {"error": ..., "field": ..., "pair_ids": [...]}, optional keys omitted.
    ServiceJson body() const;

private:
    int status_;
    std::string field_;
    std::vector<PairId> pairs_;
};

struct ExportArtifact {
    std::string content_type;
    std::string filename;
    std::string body;
};

struct ServiceOptions {
    /// Sessions are written here after every state transition and reloaded
    /// by restore_sessions(). Empty disables persistence.
    std::filesystem::path snapshot_dir;
};

/// Human-in-the-loop labeling sessions over registered datasets. Requests for
/// different sessions run concurrently; requests for one session serialize.
class SessionService {
public:
    explicit SessionService(ServiceOptions options = {});

    /// Throws std::invalid_argument when the name is already registered.
    void register_dataset(std::shared_ptr<const DatasetBundle> data);

    /// Reloads every snapshot in the snapshot directory whose dataset is
    /// registered. Returns one message per snapshot that could not be used.
    std::vector<std::string> restore_sessions();

    ServiceJson list_datasets() const;

    /// Request: {"dataset": name, "config": {...overrides}}. Returns the
    /// session handle. Unless the request sets session.use_validation, the
    /// session stops on its label budget alone.
    ServiceJson create_session(const ServiceJson& request);
    ServiceJson get_batch(const std::string& session_id);
    /// Request: {"batch_id": n, "labels": [{"pair_id": n, "label": "match"|"mismatch"|"skip"}]}.
    /// Returns the updated status.
    ServiceJson submit_labels(const std::string& session_id, const ServiceJson& request);
    ServiceJson get_status(const std::string& session_id);
    /// artifact is labeled_pool, report or snapshot.
    ExportArtifact export_artifact(const std::string& session_id, std::string_view artifact);

    std::size_t session_count() const;

private:
    struct Entry {
        std::mutex mutex;
        std::string id;
        std::string created_at;
        std::unique_ptr<Session> session;
        std::uint64_t issued_batch = 0;
        std::string issued_at;
    };

    std::shared_ptr<Entry> find(const std::string& session_id) const;
    std::shared_ptr<const DatasetBundle> dataset(const std::string& name) const;
    static std::string new_session_id();
    void note_batch(Entry& entry);
    void persist(const Entry& entry) const;
    SessionSnapshot snapshot_of(const Entry& entry) const;
    ServiceJson handle_json(const Entry& entry) const;
    ServiceJson status_json(const Entry& entry) const;

    ServiceOptions options_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const DatasetBundle>> datasets_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// Routes the HTTP API onto a service:
///   GET  /datasets
///   POST /sessions
///   GET  /sessions/{id}/batch
///   POST /sessions/{id}/labels
///   GET  /sessions/{id}/status
///   GET  /sessions/{id}/export/{labeled_pool|report|snapshot}
void bind_routes(httplib::Server& server, SessionService& service);

/// Current UTC time as 2024-01-31T12:00:00Z.
std::string utc_timestamp();

}  // namespace almatch
