#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "g4r/chat_engine.hpp"
#include "g4r/llm_gateway.hpp"
#include "g4r/store.hpp"

namespace g4r {

struct ServiceConfig {
  std::string bind_host = "127.0.0.1";
  int port = 8080;
  /// Absolute URL participants reach the service at; used in snippets and
  /// preview links. Empty means http://<bind_host>:<port>.
  std::string public_base_url;
  std::filesystem::path db_path = "g4r.db";
  std::optional<std::string> default_api_key;
  /// OpenAI-compatible base URL, or "echo" for the deterministic provider.
  std::string upstream_url = "https://api.openai.com/v1";
  std::string model_id = "gpt-4o-mini";
  std::chrono::seconds upstream_timeout{60};
  /// Guest interface creations allowed per client IP per rolling 24 h; 0 = unlimited.
  std::size_t guest_create_limit = 20;
  std::chrono::hours token_ttl{24};
  std::size_t max_message_bytes = 32 * 1024;
  /// Optional directories served at /console and /samples.
  std::optional<std::filesystem::path> console_dir;
  std::optional<std::filesystem::path> samples_dir;
};

/// Reads G4R_BIND_ADDR (host:port), G4R_DB_PATH, G4R_DEFAULT_API_KEY,
/// G4R_UPSTREAM_URL, G4R_MODEL_ID, G4R_PUBLIC_URL, G4R_CONSOLE_DIR and
/// G4R_SAMPLES_DIR over the defaults above.
ServiceConfig service_config_from_env();

/// Builds the provider selected by `upstream_url`.
std::unique_ptr<CompletionProvider> make_provider(const ServiceConfig& config);

/// The HTTP service. Routes:
///   GET  /api/defaults
///   POST /api/accounts                      {name, email, password}
///   POST /api/signin                        {email, password} -> {token, expires_at}
///   GET  /api/researcher/interfaces         (bearer)
///   POST /api/interfaces                    (bearer optional)
///   GET  /api/interfaces/{id}/bootstrap
///   GET  /api/interfaces/{id}/snippet
///   POST /api/interfaces/{id}/sessions      {participant_id}
///   POST /api/sessions/{sid}/messages       {text}
///   GET  /api/interfaces/{id}/messages.csv  (bearer, owner only)
///   GET  /embed/{id}?pid=...
class Service {
 public:
  Service(ServiceConfig config, Store& store, const CompletionProvider& provider);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds to config.bind_host (config.port, or any free port when 0) and
  /// serves on a background thread. Returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

  int port() const noexcept;
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace g4r
