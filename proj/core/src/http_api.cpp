#include "g4r/http_api.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <json.hpp>

#include <cctype>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "g4r/embed_snippet.hpp"
#include "g4r/error.hpp"
#include "g4r/export_merge.hpp"
#include "json_codec.hpp"

namespace g4r {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxRequestBytes = 512 * 1024;
constexpr std::size_t kServerThreads = 64;
constexpr std::string_view kMaskedKey = "********";

std::optional<std::string> env(const char* name) {
  const char* value = std::getenv(name);
  if (!value || !*value) return std::nullopt;
  return std::string(value);
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

std::string slugify(std::string_view name) {
  std::string slug;
  for (unsigned char c : name) {
    if (std::isalnum(c)) {
      slug += static_cast<char>(std::tolower(c));
    } else if (!slug.empty() && slug.back() != '-') {
      slug += '-';
    }
    if (slug.size() >= 60) break;
  }
  while (!slug.empty() && slug.back() == '-') slug.pop_back();
  return slug.empty() ? "interface" : slug;
}

std::string url_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  return out;
}

/// Opaque bearer tokens issued at sign-in.
class TokenRegistry {
 public:
  explicit TokenRegistry(std::chrono::hours ttl) : ttl_(ttl) {}

  std::pair<std::string, Timestamp> issue(const ResearcherId& who) {
    auto token = crypto::random_hex(32);
    const auto expires = now_utc() + std::chrono::duration_cast<std::chrono::milliseconds>(ttl_);
    std::lock_guard lock(mutex_);
    tokens_[token] = {who, expires};
    return {std::move(token), expires};
  }

  std::optional<ResearcherId> resolve(const std::string& token) {
    std::lock_guard lock(mutex_);
    const auto it = tokens_.find(token);
    if (it == tokens_.end()) return std::nullopt;
    if (it->second.second <= now_utc()) {
      tokens_.erase(it);
      return std::nullopt;
    }
    return it->second.first;
  }

 private:
  std::chrono::hours ttl_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::pair<ResearcherId, Timestamp>> tokens_;
};

/// Sliding 24 h window of guest creations per client address.
class GuestLimiter {
 public:
  explicit GuestLimiter(std::size_t limit) : limit_(limit) {}

  bool admit(const std::string& client) {
    if (limit_ == 0) return true;
    const auto now = std::chrono::steady_clock::now();
    std::lock_guard lock(mutex_);
    auto& times = seen_[client];
    while (!times.empty() && now - times.front() >= std::chrono::hours{24}) times.pop_front();
    if (times.size() >= limit_) return false;
    times.push_back(now);
    return true;
  }

 private:
  std::size_t limit_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::deque<std::chrono::steady_clock::time_point>> seen_;
};

enum class AuthState { Absent, Valid, Invalid };

struct Auth {
  AuthState state = AuthState::Absent;
  std::optional<ResearcherId> researcher;
};

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception&) {
    send_error(res, 400, "MalformedInput", "request body is not valid JSON");
    return std::nullopt;
  }
}

std::optional<std::string> string_field(const json& doc, const char* key) {
  if (!doc.is_object()) return std::nullopt;
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

ServiceConfig service_config_from_env() {
  ServiceConfig config;
  if (auto bind = env("G4R_BIND_ADDR")) {
    const auto colon = bind->rfind(':');
    if (colon == std::string::npos) {
      config.bind_host = *bind;
    } else {
      config.bind_host = bind->substr(0, colon);
      config.port = std::stoi(bind->substr(colon + 1));
    }
  }
  if (auto v = env("G4R_DB_PATH")) config.db_path = *v;
  if (auto v = env("G4R_DEFAULT_API_KEY")) config.default_api_key = *v;
  if (auto v = env("G4R_UPSTREAM_URL")) config.upstream_url = *v;
  if (auto v = env("G4R_MODEL_ID")) config.model_id = *v;
  if (auto v = env("G4R_PUBLIC_URL")) config.public_base_url = *v;
  if (auto v = env("G4R_CONSOLE_DIR")) config.console_dir = *v;
  if (auto v = env("G4R_SAMPLES_DIR")) config.samples_dir = *v;
  return config;
}

std::unique_ptr<CompletionProvider> make_provider(const ServiceConfig& config) {
  if (config.upstream_url == "echo") return std::make_unique<EchoProvider>();
  return std::make_unique<OpenAiCompatibleClient>(
      OpenAiCompatibleClient::Options{config.upstream_url, config.upstream_timeout});
}

struct Service::Impl {
  ServiceConfig config;
  Store& store;
  ChatEngine engine;
  TokenRegistry tokens;
  GuestLimiter guests;
  httplib::Server server;
  std::thread thread;
  int bound_port = 0;

  Impl(ServiceConfig cfg, Store& s, const CompletionProvider& provider)
      : config(std::move(cfg)),
        store(s),
        engine(s, provider,
               ChatEngine::Options{config.model_id,
                                   config.upstream_url == "echo" && !config.default_api_key
                                       ? std::optional<std::string>("echo")
                                       : config.default_api_key,
                                   now_utc}),
        tokens(config.token_ttl),
        guests(config.guest_create_limit) {
    server.new_task_queue = [] { return new httplib::ThreadPool(kServerThreads); };
    server.set_payload_max_length(kMaxRequestBytes);
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::info("{} {} {}", req.method, req.path, res.status);
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        spdlog::error("unhandled error: {}", e.what());
      } catch (...) {
        spdlog::error("unhandled non-standard exception");
      }
      send_error(res, 500, "InternalError", "internal error");
    });
    routes();
  }

  std::string public_base() const {
    if (!config.public_base_url.empty()) {
      auto url = config.public_base_url;
      while (!url.empty() && url.back() == '/') url.pop_back();
      return url;
    }
    return "http://" + config.bind_host + ":" + std::to_string(bound_port ? bound_port : config.port);
  }

  Auth authenticate(const httplib::Request& req) {
    if (!req.has_header("Authorization")) return {};
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    if (!header.starts_with(kBearer) || header.size() == kBearer.size()) return {AuthState::Invalid, std::nullopt};
    auto who = tokens.resolve(header.substr(kBearer.size()));
    if (!who) return {AuthState::Invalid, std::nullopt};
    return {AuthState::Valid, std::move(who)};
  }

  std::optional<InterfaceConfig> find_interface(const std::string& id) {
    try {
      return store.get_interface(InterfaceId{id});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NotFound) return std::nullopt;
      throw;
    }
  }

  json details_json(const InterfaceConfig& cfg) {
    auto details = codec::config_to_json(cfg);
    details["api_key"] = cfg.api_key ? json(kMaskedKey) : json(nullptr);
    return details;
  }

  void routes() {
    server.Get("/api/defaults", [this](const httplib::Request&, httplib::Response& res) {
      auto defaults = codec::config_to_json(apply_defaults({}));
      for (const char* key : {"interface_id", "owner_id", "created_at", "study_name"}) defaults.erase(key);
      defaults["api_key"] = nullptr;
      send_json(res, 200, defaults);
    });

    server.Post("/api/accounts", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      const auto name = string_field(*body, "name");
      const auto email = string_field(*body, "email");
      const auto password = string_field(*body, "password");
      if (!name || !email || !password) {
        return send_error(res, 400, "MalformedInput", "name, email and password are required strings");
      }
      try {
        const auto account = store.create_account(*name, *email, *password);
        send_json(res, 201, {{"researcher_id", account.researcher_id.value},
                             {"display_name", account.display_name},
                             {"email", account.email}});
      } catch (const Error& e) {
        switch (e.code()) {
          case ErrorCode::DuplicateEmail: return send_error(res, 409, to_string(e.code()), e.what());
          case ErrorCode::WeakPassword:
          case ErrorCode::InvalidEmail: return send_error(res, 422, to_string(e.code()), e.what());
          default: throw;
        }
      }
    });

    server.Post("/api/signin", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      const auto email = string_field(*body, "email").value_or("");
      const auto password = string_field(*body, "password").value_or("");
      try {
        const auto account = store.verify_credentials(email, password);
        auto [token, expires] = tokens.issue(account.researcher_id);
        send_json(res, 200, {{"token", token},
                             {"researcher_id", account.researcher_id.value},
                             {"display_name", account.display_name},
                             {"expires_at", format_timestamp(expires)}});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AuthFailed) throw;
        send_error(res, 401, "AuthFailed", e.what());
      }
    });

    server.Get("/api/researcher/interfaces", [this](const httplib::Request& req, httplib::Response& res) {
      const auto auth = authenticate(req);
      if (auth.state != AuthState::Valid) return send_error(res, 401, "Unauthorized", "sign in required");
      json list = json::array();
      for (const auto& s : store.list_interfaces(*auth.researcher)) {
        list.push_back({{"interface_id", s.interface_id.value},
                        {"study_name", s.study_name},
                        {"created_at", format_timestamp(s.created_at)},
                        {"download_url", "/api/interfaces/" + s.interface_id.value + "/messages.csv"}});
      }
      send_json(res, 200, list);
    });

    server.Post("/api/interfaces", [this](const httplib::Request& req, httplib::Response& res) {
      const auto auth = authenticate(req);
      if (auth.state == AuthState::Invalid) return send_error(res, 401, "Unauthorized", "invalid or expired token");
      auto body = parse_body(req, res);
      if (!body) return;

      std::vector<FieldError> errors;
      auto partial = codec::partial_from_json(*body, errors);
      const auto now = now_utc();
      const bool guest = auth.state == AuthState::Absent;
      if (guest && !partial.study_name) partial.study_name = "guest-" + format_timestamp(now);

      auto cfg = apply_defaults(partial);
      cfg.created_at = now;
      if (!guest) cfg.owner_id = auth.researcher;
      for (auto& e : validate_config(cfg)) errors.push_back(std::move(e));
      if (!errors.empty()) {
        return send_json(res, 422, {{"error", "ValidationFailed"}, {"fields", codec::field_errors_to_json(errors)}});
      }
      if (guest && !guests.admit(req.remote_addr)) {
        return send_error(res, 429, "RateLimited", "guest interface limit reached for today; create an account");
      }

      cfg.interface_id = store.save_interface(cfg);
      const auto base = public_base();
      const auto snippet = generate_snippet({cfg.interface_id, cfg.access_mode, base});
      send_json(res, 201,
                {{"interface_id", cfg.interface_id.value},
                 {"preview_url", base + "/embed/" + cfg.interface_id.value + "?pid=" + generate_participant_id()},
                 {"snippet_text", snippet},
                 {"details", details_json(cfg)}});
    });

    server.Get(R"(/api/interfaces/([A-Za-z0-9]+)/bootstrap)", [this](const httplib::Request& req,
                                                                    httplib::Response& res) {
      const auto cfg = find_interface(req.matches[1]);
      if (!cfg) return send_error(res, 404, "NotFound", "no such interface");
      send_json(res, 200, codec::bootstrap_to_json(make_widget_bootstrap(*cfg)));
    });

    server.Get(R"(/api/interfaces/([A-Za-z0-9]+)/snippet)", [this](const httplib::Request& req,
                                                                  httplib::Response& res) {
      const auto cfg = find_interface(req.matches[1]);
      if (!cfg) return send_error(res, 404, "NotFound", "no such interface");
      res.set_content(generate_snippet({cfg->interface_id, cfg->access_mode, public_base()}),
                      "text/plain; charset=utf-8");
    });

    server.Post(R"(/api/interfaces/([A-Za-z0-9]+)/sessions)", [this](const httplib::Request& req,
                                                                    httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      const auto pid = string_field(*body, "participant_id").value_or("");
      if (pid.empty()) return send_error(res, 422, "InvalidArgument", "participant_id is required");
      const auto cfg = find_interface(req.matches[1]);
      if (!cfg) return send_error(res, 404, "NotFound", "no such interface");
      const auto session = engine.start_session(cfg->interface_id, pid);
      send_json(res, 200, {{"session_id", session.session_id.value},
                           {"participant_id", session.participant_id},
                           {"messages_sent", session.messages_sent},
                           {"remaining_quota", remaining_quota(session, *cfg)}});
    });

    server.Post(R"(/api/sessions/([A-Za-z0-9]+)/messages)", [this](const httplib::Request& req,
                                                                  httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      const auto text = string_field(*body, "text").value_or("");
      if (text.empty()) return send_error(res, 422, "InvalidArgument", "text is required");
      if (text.size() > config.max_message_bytes) {
        return send_error(res, 413, "MessageTooLarge", "message exceeds the size limit");
      }
      const SessionId sid{req.matches[1]};
      SendOutcome outcome;
      try {
        outcome = engine.handle_participant_message(sid, text);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NotFound) throw;
        return send_error(res, 404, "NotFound", "no such session");
      }
      if (const auto* cap = std::get_if<CapReached>(&outcome)) {
        res.status = 409;
        res.set_content(cap->message, "text/plain; charset=utf-8");
        return;
      }
      if (const auto* failure = std::get_if<UpstreamFailure>(&outcome)) {
        spdlog::warn("upstream failure: {}", failure->detail);
        return send_json(res, 502, {{"error", "UpstreamFailure"},
                                    {"kind", failure->kind ? json(to_string(*failure->kind)) : json("MissingKey")},
                                    {"message", "the model could not be reached; please try again"}});
      }
      const auto& exchange = std::get<MessageExchange>(outcome);
      const auto cfg = store.get_interface(store.find_session(sid)->interface_id);
      send_json(res, 200, {{"gpt_message", exchange.gpt_message},
                           {"remaining_quota", std::max<std::int64_t>(0, cfg.max_messages - exchange.seq)},
                           {"seq", exchange.seq},
                           {"exchanged_at", format_timestamp(exchange.exchanged_at)}});
    });

    server.Get(R"(/api/interfaces/([A-Za-z0-9]+)/messages\.csv)", [this](const httplib::Request& req,
                                                                        httplib::Response& res) {
      const auto auth = authenticate(req);
      if (auth.state != AuthState::Valid) return send_error(res, 401, "Unauthorized", "sign in required");
      const auto cfg = find_interface(req.matches[1]);
      if (!cfg) return send_error(res, 404, "NotFound", "no such interface");
      if (!cfg->owner_id || *cfg->owner_id != *auth.researcher) {
        return send_error(res, 403, "Forbidden", "not the owner of this interface");
      }
      const auto rows = to_export_rows(store.fetch_exchanges(cfg->interface_id));
      res.set_header("Content-Disposition",
                     "attachment; filename=\"" + slugify(cfg->study_name) + "-messages.csv\"");
      res.set_content(export_csv(rows), "text/csv; charset=utf-8");
    });

    server.Get(R"(/embed/([A-Za-z0-9]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto cfg = find_interface(req.matches[1]);
      if (!cfg) {
        res.status = 404;
        res.set_content("<!DOCTYPE html><title>Not found</title><p>This interface does not exist.</p>",
                        "text/html; charset=utf-8");
        return;
      }
      auto pid = req.get_param_value("pid");
      if (pid.empty()) {
        // Previews opened without a pid get a fresh one so the page is shareable.
        res.set_redirect("/embed/" + cfg->interface_id.value + "?pid=" + url_encode(generate_participant_id()));
        return;
      }
      res.set_content(render_embed_page(make_widget_bootstrap(*cfg), pid), "text/html; charset=utf-8");
    });

    if (config.console_dir) server.set_mount_point("/console", config.console_dir->string());
    if (config.samples_dir) server.set_mount_point("/samples", config.samples_dir->string());
  }
};

Service::Service(ServiceConfig config, Store& store, const CompletionProvider& provider)
    : impl_(std::make_unique<Impl>(std::move(config), store, provider)) {}

Service::~Service() { stop(); }

int Service::start() {
  auto& s = impl_->server;
  if (impl_->config.port == 0) {
    impl_->bound_port = s.bind_to_any_port(impl_->config.bind_host);
  } else if (s.bind_to_port(impl_->config.bind_host, impl_->config.port)) {
    impl_->bound_port = impl_->config.port;
  } else {
    impl_->bound_port = -1;
  }
  if (impl_->bound_port <= 0) {
    throw Error(ErrorCode::InvalidArgument, "cannot bind " + impl_->config.bind_host + ":" +
                                                std::to_string(impl_->config.port));
  }
  impl_->thread = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return impl_->bound_port;
}

void Service::run() {
  auto& s = impl_->server;
  impl_->bound_port = impl_->config.port;
  if (!s.bind_to_port(impl_->config.bind_host, impl_->config.port)) {
    throw Error(ErrorCode::InvalidArgument, "cannot bind " + impl_->config.bind_host + ":" +
                                                std::to_string(impl_->config.port));
  }
  spdlog::info("listening on {}", base_url());
  s.listen_after_bind();
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Service::port() const noexcept { return impl_->bound_port; }

std::string Service::base_url() const { return impl_->public_base(); }

}  // namespace g4r
