#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "g4r/domain.hpp"
#include "g4r/llm_gateway.hpp"
#include "g4r/store.hpp"

namespace g4r {

inline constexpr std::string_view kCapReachedMessage = "You have sent the maximum allowed messages";

/// prepend, body and append joined by single newlines; absent parts and
/// their separators are dropped.
std::string wrap_participant_text(const InterfaceConfig& cfg, std::string_view text);

/// A reply that quotes the whole wrapped turn verbatim would show the
/// participant the hidden prepend/append text; each such quote is replaced
/// by the participant's own text. Other replies are returned unchanged.
std::string unquote_wrapped_turn(const InterfaceConfig& cfg, std::string_view text, std::string reply);

/// The message list sent upstream for a new participant turn:
/// [System(system_prompt)?] [Assistant(first_message)?] then each past
/// exchange as User(wrapped)/Assistant(reply), then User(wrapped new_text).
std::vector<UpstreamMessage> compose_upstream(const InterfaceConfig& cfg, std::span<const MessageExchange> history,
                                              std::string_view new_text);

/// max_messages - messages_sent, clamped at zero.
std::int64_t remaining_quota(const ParticipantSession& session, const InterfaceConfig& cfg) noexcept;

struct CapReached {
  std::string message{kCapReachedMessage};
};

struct UpstreamFailure {
  std::optional<ProviderErrorKind> kind;  // nullopt when no api key was available
  std::string detail;
};

using SendOutcome = std::variant<MessageExchange, CapReached, UpstreamFailure>;

class ChatEngine {
 public:
  struct Options {
    std::string model_id = "gpt-4o-mini";
    std::optional<std::string> server_api_key;
    std::function<Timestamp()> clock = now_utc;
  };

  ChatEngine(Store& store, const CompletionProvider& provider, Options options);
  ~ChatEngine();

  ChatEngine(const ChatEngine&) = delete;
  ChatEngine& operator=(const ChatEngine&) = delete;

  /// Idempotent per (interface, participant). Throws UnknownInterface or
  /// InvalidArgument for an empty participant id.
  ParticipantSession start_session(const InterfaceId& interface_id, std::string_view participant_id);

  /// Runs one participant turn. Sends within one session are serialized.
  /// Throws NotFound for an unknown session and InvalidArgument for empty text.
  SendOutcome handle_participant_message(const SessionId& session_id, std::string_view text);

  const Options& options() const noexcept { return options_; }

 private:
  struct SessionLocks;

  Store& store_;
  const CompletionProvider& provider_;
  Options options_;
  std::unique_ptr<SessionLocks> locks_;
};

}  // namespace g4r
