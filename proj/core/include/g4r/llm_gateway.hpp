#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "g4r/domain.hpp"

namespace g4r {

enum class Role { System, Assistant, User };

std::string_view to_string(Role role) noexcept;

struct UpstreamMessage {
  Role role;
  std::string content;

  friend bool operator==(const UpstreamMessage&, const UpstreamMessage&) = default;
};

struct CompletionRequest {
  std::vector<UpstreamMessage> messages;
  double temperature = 1.0;
  std::string model_id;
  std::string api_key;
};

enum class ProviderErrorKind { Auth, RateLimited, Timeout, Malformed, Transport };

std::string_view to_string(ProviderErrorKind kind) noexcept;

struct ProviderError {
  ProviderErrorKind kind;
  std::string detail;
};

using CompletionResult = std::variant<std::string, ProviderError>;

/// A chat-completion backend. Implementations must allow concurrent calls.
class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual CompletionResult complete(const CompletionRequest& request) const = 0;
};

inline constexpr std::string_view kEchoPrefix = "echo: ";

/// Deterministic provider: replies "echo: " followed by the last User message.
class EchoProvider final : public CompletionProvider {
 public:
  CompletionResult complete(const CompletionRequest& request) const override;
};

/// Client for an OpenAI-compatible `POST {base_url}/chat/completions`.
/// The api key only ever leaves the process in the Authorization header.
class OpenAiCompatibleClient final : public CompletionProvider {
 public:
  struct Options {
    std::string base_url = "https://api.openai.com/v1";
    std::chrono::seconds timeout{60};
  };

  explicit OpenAiCompatibleClient(Options options);

  CompletionResult complete(const CompletionRequest& request) const override;

 private:
  Options options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// JSON body with `model`, `messages[{role,content}]` and `temperature`.
/// The api key is deliberately not part of the body.
std::string serialize_request_body(const CompletionRequest& request);

/// Inverse of serialize_request_body; the returned api_key is empty.
/// Throws Error(MalformedInput).
CompletionRequest parse_request_body(std::string_view body);

/// Content of the first choice's message. Throws Error(MalformedInput).
std::string parse_completion_response(std::string_view body);

/// The interface's own key wins over the server default; nullopt when
/// neither is set.
std::optional<std::string> resolve_api_key(const InterfaceConfig& cfg,
                                           const std::optional<std::string>& server_default);

}  // namespace g4r
