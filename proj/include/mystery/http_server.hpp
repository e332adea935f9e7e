#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "mystery/error.hpp"
#include "mystery/session.hpp"

namespace mystery::server {

struct HttpOptions {
    /// Served at "/" when set (the web client bundle).
    std::optional<std::filesystem::path> static_dir;
    /// Upper bound on a long-poll wait.
    std::chrono::milliseconds max_wait{25000};
};

int http_status(ErrorCode code);

class HttpServer {
public:
    explicit HttpServer(SessionManager& sessions, HttpOptions options = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Port 0 picks a free port. Returns the bound port; throws Error(io).
    int bind(const std::string& host, int port);
    /// Serves until stop().
    void run();
    /// run() on a background thread.
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

}  // namespace mystery::server
