#include <httplib.h>

#include "almatch/service.hpp"

namespace almatch {

namespace {

void send_json(httplib::Response& res, int status, const ServiceJson& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

// Runs a handler and maps service and parse errors onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& handler) {
    try {
        handler();
    } catch (const ServiceError& e) {
        send_json(res, e.status(), e.body());
    } catch (const ServiceJson::parse_error& e) {
        send_json(res, 400, ServiceJson{{"error", std::string("malformed JSON body: ") + e.what()}});
    } catch (const std::exception& e) {
        send_json(res, 500, ServiceJson{{"error", e.what()}});
    }
}

}  // namespace

void bind_routes(httplib::Server& server, SessionService& service) {
    server.Get("/datasets", [&service](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, service.list_datasets()); });
    });
    server.Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 201, service.create_session(ServiceJson::parse(req.body))); });
    });
    server.Get(R"(/sessions/([^/]+)/batch)", [&service](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, service.get_batch(req.matches[1])); });
    });
    server.Post(R"(/sessions/([^/]+)/labels)", [&service](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, service.submit_labels(req.matches[1], ServiceJson::parse(req.body))); });
    });
    server.Get(R"(/sessions/([^/]+)/status)", [&service](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, service.get_status(req.matches[1])); });
    });
    server.Get(R"(/sessions/([^/]+)/export/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto artifact = service.export_artifact(req.matches[1], req.matches[2].str());
            res.status = 200;
            res.set_header("Content-Disposition", "attachment; filename=\"" + artifact.filename + "\"");
            res.set_content(std::move(artifact.body), artifact.content_type);
        });
    });
    // The labeling UI may be served from another origin during development.
    server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
    });
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) send_json(res, res.status, ServiceJson{{"error", httplib::status_message(res.status)}});
    });
}

}  // namespace almatch
