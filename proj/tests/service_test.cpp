#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "almatch/service.hpp"
#include "support.hpp"

using namespace almatch;

namespace {

std::shared_ptr<const DatasetBundle> restaurants() {
    static const auto data = load_dataset(testing::data_dir() / "restaurants");
    return data;
}

// Answers a served batch from the ground truth.
ServiceJson truthful_labels(const ServiceJson& batch) {
    const auto& data = *restaurants();
    ServiceJson labels = ServiceJson::array();
    for (const auto& p : batch["pairs"]) {
        const auto id = p["pair_id"].get<PairId>();
        labels.push_back({{"pair_id", id}, {"label", data.train[id].truth == Label::match ? "match" : "mismatch"}});
    }
    return ServiceJson{{"batch_id", batch["batch_id"]}, {"labels", labels}};
}

template <class F>
ServiceError service_error(F&& call) {
    try {
        call();
    } catch (const ServiceError& e) {
        return e;
    }
    FAIL("expected ServiceError");
    return ServiceError(0, "");
}

std::string create(SessionService& service, ServiceJson config = ServiceJson::object()) {
    return service.create_session({{"dataset", "restaurants"}, {"config", config}})["session_id"].get<std::string>();
}

// Labels batches until the session stops; returns the number of rounds.
std::size_t label_to_end(SessionService& service, const std::string& id) {
    std::size_t rounds = 0;
    while (true) {
        const auto batch = service.get_batch(id);
        if (batch["pairs"].empty()) return rounds;
        service.submit_labels(id, truthful_labels(batch));
        ++rounds;
    }
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("datasets and session creation") {
    SessionService service;
    service.register_dataset(restaurants());
    CHECK_THROWS_AS(service.register_dataset(restaurants()), std::invalid_argument);
    const auto list = service.list_datasets()["datasets"];
    REQUIRE(list.size() == 1);
    CHECK(list[0]["name"] == "restaurants");
    CHECK(list[0]["scale"] == "small");

    const auto handle = service.create_session({{"dataset", "restaurants"}});
    CHECK(handle["status"] == "awaiting_labels");
    CHECK(handle["dataset"] == "restaurants");
    CHECK(handle["session_id"].get<std::string>().size() == 16);
    CHECK(service.session_count() == 1);

    CHECK(service_error([&] { service.create_session({{"dataset", "nowhere"}}); }).status() == 404);
    CHECK(service_error([&] { service.create_session(ServiceJson::object()); }).field() == "dataset");
    const auto bad = service_error(
        [&] { service.create_session({{"dataset", "restaurants"}, {"config", {{"session", {{"batch", 0}}}}}}); });
    CHECK(bad.status() == 400);
    CHECK(bad.field() == "config.session.batch");
    CHECK(service_error([&] { service.get_status("missing"); }).status() == 404);
    CHECK(service_error([&] { service.export_artifact(handle["session_id"], "pdf"); }).status() == 404);
}

TEST_CASE("batches are idempotent until answered") {
    SessionService service;
    service.register_dataset(restaurants());
    const auto id = create(service);
    const auto first = service.get_batch(id);
    CHECK(first["pairs"].size() == 6);
    CHECK(first["round"] == 0);
    CHECK(service.get_batch(id) == first);
    const auto& pair = first["pairs"][0];
    CHECK(pair["left"]["attributes"].contains("name"));
    for (const auto& [attr, hint] : pair["hints"].items()) {
        CHECK(hint.get<double>() >= 0.0);
        CHECK(hint.get<double>() <= 1.0);
    }

    // A partial answer names the unanswered pairs and changes nothing.
    auto partial = truthful_labels(first);
    partial["labels"].erase(partial["labels"].begin());
    const auto missing = service_error([&] { service.submit_labels(id, partial); });
    CHECK(missing.status() == 400);
    CHECK(missing.pairs() == std::vector<PairId>{first["pairs"][0]["pair_id"].get<PairId>()});
    CHECK(service.get_batch(id) == first);

    auto wrong_label = truthful_labels(first);
    wrong_label["labels"][0]["label"] = "maybe";
    CHECK(service_error([&] { service.submit_labels(id, wrong_label); }).field() == "labels[0].label");

    const auto status = service.submit_labels(id, truthful_labels(first));
    CHECK(status["labeled"] == 6);
    CHECK(status["iteration"] == 0);
    CHECK(status["f1_history"].size() == 1);
    CHECK(status["use_validation"] == false);
    const auto second = service.get_batch(id);
    CHECK(second["batch_id"] != first["batch_id"]);
    CHECK(second["pairs"].size() == 4);

    // Resubmitting the answered batch is stale.
    const auto stale = service_error([&] { service.submit_labels(id, truthful_labels(first)); });
    CHECK(stale.status() == 409);
    CHECK(stale.field() == "batch_id");
}

TEST_CASE("a budget-only session stops and then serves empty batches") {
    SessionService service;
    service.register_dataset(restaurants());
    const auto id = create(service, {{"session", {{"max_iterations", 3}}}});
    CHECK(label_to_end(service, id) == 4);
    const auto status = service.get_status(id);
    CHECK(status["status"] == "stopped");
    CHECK(status["stop_reason"] == "max_iterations");
    CHECK(status["labeled"] == status["label_budget"]);
    CHECK(status["pending_batch_id"].is_null());
    const auto batch = service.get_batch(id);
    CHECK(batch["pairs"].empty());
    CHECK(batch["batch_id"].is_null());
    CHECK(service_error([&] { service.submit_labels(id, {{"batch_id", 1u}, {"labels", ServiceJson::array()}}); })
              .status() == 409);

    const auto pool = service.export_artifact(id, "labeled_pool");
    CHECK(pool.content_type == "text/csv");
    CHECK(parse_csv(pool.body).rows.size() == status["labeled"].get<std::size_t>());
    CHECK(service.export_artifact(id, "report").body == service.export_artifact(id, "report").body);
    const auto snap = parse_snapshot(service.export_artifact(id, "snapshot").body);
    CHECK(snap.session_id == id);
    CHECK(snap.state.status == SessionStatus::stopped);
}

TEST_CASE("sessions survive a restart through the snapshot directory") {
    testing::TempDir dir("service");
    std::string id;
    ServiceJson pending;
    std::string pool;
    {
        SessionService service(ServiceOptions{dir.path()});
        service.register_dataset(restaurants());
        id = create(service);
        service.submit_labels(id, truthful_labels(service.get_batch(id)));
        pending = service.get_batch(id);
        pool = service.export_artifact(id, "labeled_pool").body;
    }
    SessionService restarted(ServiceOptions{dir.path()});
    restarted.register_dataset(restaurants());
    CHECK(restarted.restore_sessions().empty());
    CHECK(restarted.session_count() == 1);
    CHECK(restarted.get_batch(id) == pending);
    CHECK(restarted.export_artifact(id, "labeled_pool").body == pool);
    restarted.submit_labels(id, truthful_labels(pending));
    CHECK(restarted.get_status(id)["labeled"] == 10);

    // Without the dataset the snapshot is reported, not loaded.
    SessionService orphan(ServiceOptions{dir.path()});
    CHECK(orphan.restore_sessions().size() == 1);
    CHECK(orphan.session_count() == 0);
}

TEST_CASE("sessions are independent") {
    SessionService service;
    service.register_dataset(restaurants());
    const auto a = create(service);
    const auto b = create(service);
    CHECK(a != b);
    service.submit_labels(a, truthful_labels(service.get_batch(a)));
    CHECK(service.get_status(a)["labeled"] == 6);
    CHECK(service.get_status(b)["labeled"] == 0);

    std::vector<std::thread> workers;
    std::vector<std::string> ids(4);
    for (std::size_t t = 0; t < ids.size(); ++t) {
        workers.emplace_back([&, t] {
            ids[t] = create(service, {{"session", {{"max_iterations", 2}}}});
            label_to_end(service, ids[t]);
        });
    }
    for (auto& w : workers) w.join();
    const auto report = service.export_artifact(ids[0], "labeled_pool").body;
    for (const auto& id : ids) {
        CHECK(service.get_status(id)["status"] == "stopped");
        CHECK(service.export_artifact(id, "labeled_pool").body == report);
    }
}

TEST_CASE("http routes") {
    SessionService service;
    service.register_dataset(restaurants());
    httplib::Server server;
    bind_routes(server, service);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    auto datasets = client.Get("/datasets");
    REQUIRE(datasets);
    CHECK(datasets->status == 200);
    CHECK(datasets->get_header_value("Access-Control-Allow-Origin") == "*");

    auto created = client.Post("/sessions", R"({"dataset": "restaurants"})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto id = ServiceJson::parse(created->body)["session_id"].get<std::string>();

    auto batch = client.Get("/sessions/" + id + "/batch");
    REQUIRE(batch);
    CHECK(batch->status == 200);
    const auto batch_json = ServiceJson::parse(batch->body);
    auto again = client.Get("/sessions/" + id + "/batch");
    CHECK(again->body == batch->body);

    auto labels = client.Post("/sessions/" + id + "/labels", truthful_labels(batch_json).dump(), "application/json");
    REQUIRE(labels);
    CHECK(labels->status == 200);
    CHECK(ServiceJson::parse(labels->body)["labeled"] == 6);
    auto stale = client.Post("/sessions/" + id + "/labels", truthful_labels(batch_json).dump(), "application/json");
    CHECK(stale->status == 409);

    auto status = client.Get("/sessions/" + id + "/status");
    CHECK(status->status == 200);
    CHECK(ServiceJson::parse(status->body)["status"] == "awaiting_labels");

    auto exported = client.Get("/sessions/" + id + "/export/labeled_pool");
    CHECK(exported->status == 200);
    CHECK(exported->get_header_value("Content-Type") == "text/csv");
    CHECK(exported->body == service.export_artifact(id, "labeled_pool").body);

    CHECK(client.Get("/sessions/nope/status")->status == 404);
    auto malformed = client.Post("/sessions", "{oops", "application/json");
    CHECK(malformed->status == 400);
    CHECK(ServiceJson::parse(malformed->body).contains("error"));
    auto bad_config = client.Post("/sessions", R"({"dataset": "restaurants", "config": {"session": {"seed": -1}}})",
                                  "application/json");
    CHECK(bad_config->status == 400);
    CHECK(ServiceJson::parse(bad_config->body)["field"] == "config.session.seed");
    CHECK(client.Get("/nothing")->status == 404);

    server.stop();
    listener.join();
}

}
