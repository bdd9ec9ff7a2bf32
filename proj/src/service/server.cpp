// SPDX-License-Identifier: Apache-2.0
#include "rightpath/service.hpp"

#include <httplib.h>

#include <algorithm>

namespace rightpath::service {

struct Server::Impl {
    std::shared_ptr<Api> api;
    std::vector<std::string> cors_origins;
    httplib::Server http;

    void cors(const httplib::Request& req, httplib::Response& res) const {
        auto origin = req.get_header_value("Origin");
        if (origin.empty()) return;
        bool allowed = std::find(cors_origins.begin(), cors_origins.end(), origin) != cors_origins.end() ||
                       std::find(cors_origins.begin(), cors_origins.end(), "*") != cors_origins.end();
        if (!allowed) return;
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }

    static void write(httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), "application/json");
    }

    static std::optional<nlohmann::json> body_of(const httplib::Request& req, httplib::Response& res) {
        if (req.body.empty()) return nlohmann::json::object();
        try {
            return nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error& e) {
            write(res, error_response(400, "bad_request", std::string("body is not JSON: ") + e.what()));
            return std::nullopt;
        }
    }

    void routes() {
        http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            cors(req, res);
            if (req.method == "OPTIONS") {
                res.status = 204;
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });
        http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"ok"})", "application/json");
        });
        http.Post("/analyze", [this](const httplib::Request& req, httplib::Response& res) {
            if (auto body = body_of(req, res)) write(res, api->analyze(*body));
        });
        http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            if (auto body = body_of(req, res)) write(res, api->create_session(*body));
        });
        http.Post(R"(/sessions/([A-Za-z0-9-]+)/turn)", [this](const httplib::Request& req, httplib::Response& res) {
            if (auto body = body_of(req, res)) write(res, api->turn(req.matches[1], *body));
        });
        http.Post(R"(/sessions/([A-Za-z0-9-]+)/context)", [this](const httplib::Request& req, httplib::Response& res) {
            write(res, api->context(req.matches[1]));
        });
        http.Post(R"(/sessions/([A-Za-z0-9-]+)/complete)", [this](const httplib::Request& req, httplib::Response& res) {
            write(res, api->complete(req.matches[1]));
        });
        http.Get(R"(/sessions/([A-Za-z0-9-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            write(res, api->get_session(req.matches[1]));
        });
        http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            write(res, error_response(res.status, res.status == 404 ? "not_found" : "http_error",
                                      "no handler for this request"));
        });
    }
};

Server::Server(std::shared_ptr<Api> api, std::vector<std::string> cors_origins) : impl_(std::make_unique<Impl>()) {
    impl_->api = std::move(api);
    impl_->cors_origins = std::move(cors_origins);
    impl_->routes();
}

Server::~Server() { stop(); }

void Server::listen(const std::string& host, int port) {
    if (!impl_->http.listen(host, port)) throw Error("listen_failed", "cannot listen on " + host + ":" + std::to_string(port));
}

int Server::bind(const std::string& host, int port) {
    int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("listen_failed", "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void Server::serve_bound() { impl_->http.listen_after_bind(); }

void Server::stop() {
    if (impl_) impl_->http.stop();
}

} // namespace rightpath::service
