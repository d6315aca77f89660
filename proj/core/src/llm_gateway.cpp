#include "g4r/llm_gateway.hpp"

#include <httplib.h>

#include <json.hpp>

#include "g4r/error.hpp"

namespace g4r {

using nlohmann::json;

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::System: return "system";
    case Role::Assistant: return "assistant";
    case Role::User: return "user";
  }
  return "user";
}

std::string_view to_string(ProviderErrorKind kind) noexcept {
  switch (kind) {
    case ProviderErrorKind::Auth: return "Auth";
    case ProviderErrorKind::RateLimited: return "RateLimited";
    case ProviderErrorKind::Timeout: return "Timeout";
    case ProviderErrorKind::Malformed: return "Malformed";
    case ProviderErrorKind::Transport: return "Transport";
  }
  return "Transport";
}

namespace {

std::optional<Role> parse_role(std::string_view text) {
  if (text == "system") return Role::System;
  if (text == "assistant") return Role::Assistant;
  if (text == "user") return Role::User;
  return std::nullopt;
}

}  // namespace

CompletionResult EchoProvider::complete(const CompletionRequest& request) const {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == Role::User) return std::string(kEchoPrefix) + it->content;
  }
  return ProviderError{ProviderErrorKind::Malformed, "request has no user message"};
}

std::string serialize_request_body(const CompletionRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body = {{"model", request.model_id}, {"messages", std::move(messages)}, {"temperature", request.temperature}};
  return body.dump();
}

CompletionRequest parse_request_body(std::string_view body) {
  CompletionRequest request;
  try {
    const auto doc = json::parse(body);
    request.model_id = doc.at("model").get<std::string>();
    request.temperature = doc.at("temperature").get<double>();
    for (const auto& m : doc.at("messages")) {
      auto role = parse_role(m.at("role").get<std::string>());
      if (!role) throw Error(ErrorCode::MalformedInput, "unknown role");
      request.messages.push_back({*role, m.at("content").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("bad completion request: ") + e.what());
  }
  return request;
}

std::string parse_completion_response(std::string_view body) {
  try {
    const auto doc = json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("bad completion response: ") + e.what());
  }
}

std::optional<std::string> resolve_api_key(const InterfaceConfig& cfg,
                                           const std::optional<std::string>& server_default) {
  if (cfg.api_key && !cfg.api_key->empty()) return cfg.api_key;
  if (server_default && !server_default->empty()) return server_default;
  return std::nullopt;
}

OpenAiCompatibleClient::OpenAiCompatibleClient(Options options) : options_(std::move(options)) {
  auto url = options_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidArgument, "upstream URL needs a scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = url;
  } else {
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
  }
}

CompletionResult OpenAiCompatibleClient::complete(const CompletionRequest& request) const {
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  client.set_bearer_token_auth(request.api_key);

  auto res = client.Post(path_prefix_ + "/chat/completions", serialize_request_body(request), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto kind = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                          ? ProviderErrorKind::Timeout
                          : ProviderErrorKind::Transport;
    return ProviderError{kind, httplib::to_string(err)};
  }
  if (res->status == 401 || res->status == 403) {
    return ProviderError{ProviderErrorKind::Auth, "upstream rejected credentials"};
  }
  if (res->status == 429) return ProviderError{ProviderErrorKind::RateLimited, "upstream rate limit"};
  if (res->status == 408 || res->status == 504) return ProviderError{ProviderErrorKind::Timeout, "upstream timeout"};
  if (res->status >= 500) {
    return ProviderError{ProviderErrorKind::Transport, "upstream status " + std::to_string(res->status)};
  }
  if (res->status != 200) {
    return ProviderError{ProviderErrorKind::Malformed, "unexpected upstream status " + std::to_string(res->status)};
  }
  try {
    return parse_completion_response(res->body);
  } catch (const Error& e) {
    return ProviderError{ProviderErrorKind::Malformed, e.what()};
  }
}

}  // namespace g4r
