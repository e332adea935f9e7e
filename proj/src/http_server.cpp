#include "mystery/http_server.hpp"

#include "httplib.h"
#include "mystery/text.hpp"

namespace mystery::server {

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::syntax:
    case ErrorCode::invalid_argument: return 400;
    case ErrorCode::unauthorized: return 401;
    case ErrorCode::forbidden: return 403;
    case ErrorCode::not_found: return 404;
    case ErrorCode::wrong_phase:
    case ErrorCode::conflict: return 409;
    case ErrorCode::io: return 500;
    default: return 422;
    }
}

namespace {

void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send(res, http_status(code), {{"error", {{"code", error_code_name(code)}, {"message", message}}}});
}

json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "request body must be JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::syntax, std::string("malformed JSON: ") + e.what());
    }
}

/// Bearer header, then query, then body field.
std::string credential(const httplib::Request& req, const json& body, const char* field) {
    const auto auth = req.get_header_value("Authorization");
    if (auth.rfind("Bearer ", 0) == 0) return std::string(text::trim(auth.substr(7)));
    if (req.has_param(field)) return req.get_param_value(field);
    if (body.contains(field) && body.at(field).is_string()) return body.at(field).get<std::string>();
    return {};
}

template <typename T>
T field(const json& body, const char* name) {
    if (!body.contains(name)) throw Error(ErrorCode::invalid_argument, std::string("missing field '") + name + "'");
    try {
        return body.at(name).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::invalid_argument, std::string("field '") + name + "' has the wrong type");
    }
}

std::uint64_t number_param(const httplib::Request& req, const char* name, std::uint64_t fallback) {
    if (!req.has_param(name)) return fallback;
    const auto v = req.get_param_value(name);
    try {
        std::size_t used = 0;
        const auto n = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_argument, std::string("parameter '") + name + "' must be a number");
    }
}

json submission_json(const Submission& s) {
    return {{"index", s.index},   {"team", s.team},     {"author", s.author},
            {"tokens", s.tokens}, {"verdict", verdict_to_json(s.verdict)}, {"submitted_at", s.submitted_at}};
}

}  // namespace

struct HttpServer::Impl {
    SessionManager& sessions;
    HttpOptions options;
    httplib::Server http;

    Impl(SessionManager& s, HttpOptions o) : sessions(s), options(std::move(o)) {}

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    Handler guarded(Handler inner) {
        return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
            try {
                inner(req, res);
            } catch (const Error& e) {
                send_error(res, e.code(), e.what());
            } catch (const json::exception& e) {
                send_error(res, ErrorCode::invalid_argument, e.what());
            } catch (const std::exception& e) {
                send_error(res, ErrorCode::io, e.what());
            }
        };
    }

    std::shared_ptr<Session> session(const httplib::Request& req) { return sessions.find(req.matches[1]); }

    void routes() {
        http.set_payload_max_length(1 << 20);
        // SO_REUSEPORT would let a second server share a busy port
        http.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });

        http.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
                     send(res, 200, {{"status", "ok"}});
                 }));

        http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      auto body = body_of(req);
                      std::optional<std::string> key;
                      if (body.contains("facilitator_key")) key = field<std::string>(body, "facilitator_key");
                      body.erase("facilitator_key");
                      const auto r = sessions.create(SessionConfig::from_json(body), key);
                      const auto s = sessions.find(r.session_id);
                      send(res, 201, {{"session", r.session_id}, {"facilitator_key", r.facilitator_key},
                                      {"phase", phase_name(s->phase())}, {"version", s->version()}});
                  }));

        http.Post(R"(/sessions/([0-9a-f]+)/join)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = body_of(req);
                      const auto s = session(req);
                      std::optional<std::string> token;
                      if (const auto c = credential(req, body, "token"); !c.empty()) token = c;
                      const auto team = body.contains("team") ? field<std::string>(body, "team") : std::string();
                      const auto name = body.contains("name") ? field<std::string>(body, "name") : std::string();
                      const auto r = s->join(team, name, token);
                      send(res, 200, {{"session", s->id()}, {"token", r.token}, {"handle", r.handle}, {"team", r.team}});
                  }));

        http.Post(R"(/sessions/([0-9a-f]+)/phase)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = body_of(req);
                      const auto s = session(req);
                      std::optional<Phase> expected;
                      if (body.contains("to")) expected = parse_phase(field<std::string>(body, "to"));
                      std::map<std::string, std::size_t> decks;
                      if (body.contains("decks")) decks = field<std::map<std::string, std::size_t>>(body, "decks");
                      const auto phase = s->advance(credential(req, body, "key"), expected, decks);
                      send(res, 200, {{"phase", phase_name(phase)}, {"version", s->version()}});
                  }));

        http.Post(R"(/sessions/([0-9a-f]+)/bracelet)",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = body_of(req);
                      const auto s = session(req);
                      const auto tokens = field<std::vector<std::string>>(body, "tokens");
                      const auto record = s->submit(credential(req, body, "token"), tokens);
                      send(res, 200, {{"submission", submission_json(record)}, {"version", record.version}});
                  }));

        http.Get(R"(/sessions/([0-9a-f]+)/suggest)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const auto s = session(req);
                     std::vector<std::string> prefix;
                     if (req.has_param("prefix")) prefix = text::split_words(req.get_param_value("prefix"));
                     json out = json::array();
                     for (const auto& g : s->suggest(credential(req, json::object(), "token"), prefix)) {
                         out.push_back({{"token", g.token}, {"probability", g.probability}});
                     }
                     send(res, 200, {{"prefix", prefix}, {"suggestions", out}});
                 }));

        http.Post(R"(/sessions/([0-9a-f]+)/rules)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = body_of(req);
                      const auto s = session(req);
                      std::string rule;
                      if (body.contains("rule")) {
                          rule = field<std::string>(body, "rule");
                      } else {
                          rule = field<std::string>(body, "lhs") + " = " +
                                 text::join(field<std::vector<std::string>>(body, "rhs"), " ");
                      }
                      const auto tally = s->propose(credential(req, body, "token"), rule);
                      send(res, 200, {{"tally", tally_to_json(tally)}, {"version", s->version()}});
                  }));

        http.Post(R"(/sessions/([0-9a-f]+)/moderation)",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = body_of(req);
                      const auto s = session(req);
                      s->moderate(credential(req, body, "key"), field<std::size_t>(body, "index"),
                                  field<bool>(body, "hidden"));
                      send(res, 200, {{"version", s->version()}});
                  }));

        http.Get(R"(/sessions/([0-9a-f]+)/reveal)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const auto s = session(req);
                     send(res, 200, s->reveal(credential(req, json::object(), "token")));
                 }));

        http.Get(R"(/sessions/([0-9a-f]+)/state)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const auto s = session(req);
                     send(res, 200, s->state(credential(req, json::object(), "token")));
                 }));

        http.Get(R"(/sessions/([0-9a-f]+)/stream)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const auto s = session(req);
                     const auto since = number_param(req, "since", 0);
                     const auto wait = std::min<std::uint64_t>(number_param(req, "wait", 0),
                                                               static_cast<std::uint64_t>(options.max_wait.count()));
                     send(res, 200,
                          s->stream(credential(req, json::object(), "token"), since, std::chrono::milliseconds(wait)));
                 }));

        if (options.static_dir) http.set_mount_point("/", options.static_dir->string());

        http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                const auto code = res.status == 404 ? ErrorCode::not_found : ErrorCode::invalid_argument;
                send(res, res.status, {{"error", {{"code", error_code_name(code)}, {"message", "no such route"}}}});
            }
        });
    }
};

HttpServer::HttpServer(SessionManager& sessions, HttpOptions options)
    : impl_(std::make_unique<Impl>(sessions, std::move(options))) {
    impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->http.bind_to_any_port(host);
        if (bound < 0) throw Error(ErrorCode::io, "cannot bind to " + host);
        return bound;
    }
    if (!impl_->http.bind_to_port(host, port)) {
        throw Error(ErrorCode::io, "cannot bind to " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::run() { impl_->http.listen_after_bind(); }

void HttpServer::start() {
    thread_ = std::thread([this] { run(); });
    impl_->http.wait_until_ready();
}

void HttpServer::stop() {
    impl_->http.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace mystery::server
