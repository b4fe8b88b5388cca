#include <httplib.h>

#include <thread>

#include "calagent/errors.hpp"
#include "calagent/service.hpp"

namespace calagent {

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kInstanceHeader = "X-Calagent-Instance";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, const Error& e) {
  int status = http_status(e.code());
  std::string code(to_string(e.code()));
  if (const auto* hf = dynamic_cast<const HandlerFailure*>(&e); hf && hf->cause()) {
    if (*hf->cause() == ErrorCode::CapacitySaturated) {
      status = 503;
      code = std::string(to_string(*hf->cause()));
    }
  }
  if (status == 503) res.set_header("Retry-After", "1");
  send_json(res, status, {{"error", code}, {"message", e.what()}});
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", "InternalError"}, {"message", e.what()}});
  }
}

}  // namespace

struct HttpServer::Impl {
  std::shared_ptr<AssistantService> service;
  httplib::Server server;
  std::thread thread;
};

HttpServer::HttpServer(std::shared_ptr<AssistantService> service) : impl_(std::make_unique<Impl>()) {
  if (!service) throw Error(ErrorCode::InvalidArgument, "server needs a service");
  impl_->service = std::move(service);
  auto& svr = impl_->server;
  AssistantService* svc = impl_->service.get();

  // Turns block their handler thread while agents run; keep plenty around.
  svr.new_task_queue = [] { return new httplib::ThreadPool(32); };

  svr.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
  });
  svr.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  svr.Post("/sessions", [svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      const CreatedSession s = svc->create_session();
      res.set_header(kInstanceHeader, s.supervisor_id);
      send_json(res, 201, to_json(s));
    });
  });

  svr.Post(R"(/sessions/([^/]+)/messages)", [svc](const httplib::Request& req,
                                                   httplib::Response& res) {
    guarded(res, [&] {
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object() || !body.contains("text") ||
          !body["text"].is_string()) {
        throw Error(ErrorCode::InvalidArgument, "body must be {\"text\": string}");
      }
      const TurnResult t = svc->post_message(req.matches[1], body["text"].get<std::string>());
      res.set_header(kInstanceHeader, t.supervisor_id);
      send_json(res, 200, to_json(t));
    });
  });

  svr.Get(R"(/sessions/([^/]+))", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto r = svc->get_session(req.matches[1]);
      if (!r) throw Error(ErrorCode::UnknownSession, "session '" + req.matches[1].str() + "' not found");
      if (r->owner_supervisor) res.set_header(kInstanceHeader, *r->owner_supervisor);
      send_json(res, 200, to_json(*r));
    });
  });

  svr.Delete(R"(/sessions/([^/]+))", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!svc->delete_session(req.matches[1])) {
        throw Error(ErrorCode::UnknownSession, "session '" + req.matches[1].str() + "' not found");
      }
      res.status = 204;
    });
  });

  svr.Get("/calendar/events", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("start") || !req.has_param("end")) {
        throw Error(ErrorCode::InvalidArgument, "start and end query parameters are required");
      }
      const auto start = parse_rfc3339(req.get_param_value("start"));
      const auto end = parse_rfc3339(req.get_param_value("end"));
      if (!start || !end) throw Error(ErrorCode::InvalidArgument, "start/end must be RFC 3339");
      res.set_header(kInstanceHeader, svc->route_request(std::nullopt));
      nlohmann::json out = nlohmann::json::array();
      for (const auto& e : svc->list_events(*start, *end)) out.push_back(to_json(e));
      send_json(res, 200, out);
    });
  });

  svr.Get("/metrics", [svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(svc->metrics())); });
  });

  svr.Get("/healthz", [svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      const bool ok = svc->healthy();
      send_json(res, ok ? 200 : 503, {{"status", ok ? "ok" : "unavailable"}});
    });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    if (port_ < 0) throw Error(ErrorCode::InvalidArgument, "cannot bind " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port)) {
      throw Error(ErrorCode::InvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = port;
  }
  return port_;
}

void HttpServer::start() {
  if (port_ < 0) throw Error(ErrorCode::InvalidArgument, "bind() before start()");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::listen() {
  if (port_ < 0) throw Error(ErrorCode::InvalidArgument, "bind() before listen()");
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace calagent
