#pragma once

#include <memory>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "mystery/http_server.hpp"
#include "mystery/session.hpp"

namespace mystery::testing {

struct Reply {
    int status = 0;
    nlohmann::json body;
};

/// In-process server on a free loopback port.
struct LiveServer {
    server::SessionManager manager;
    server::HttpServer http;
    int port = 0;

    explicit LiveServer(server::HttpOptions options = {}, server::ManagerOptions manager_options = {})
        : manager(server::Catalog::scan(MYSTERY_DATA_DIR), manager_options), http(manager, std::move(options)) {
        port = http.bind("127.0.0.1", 0);
        http.start();
    }
    ~LiveServer() { http.stop(); }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }

    static Reply wrap(const httplib::Result& r) {
        Reply out;
        if (!r) return out;
        out.status = r->status;
        out.body = nlohmann::json::parse(r->body, nullptr, false);
        return out;
    }

    static httplib::Headers bearer(const std::string& credential) {
        if (credential.empty()) return {};
        return {{"Authorization", "Bearer " + credential}};
    }

    Reply get(const std::string& path, const std::string& credential = {}) const {
        auto c = client();
        return wrap(c.Get(path, bearer(credential)));
    }

    Reply post(const std::string& path, const nlohmann::json& body, const std::string& credential = {}) const {
        auto c = client();
        return wrap(c.Post(path, bearer(credential), body.dump(), "application/json"));
    }
};

}  // namespace mystery::testing
