#include "g4r/chat_engine.hpp"

#include <algorithm>
#include <mutex>
#include <unordered_map>

#include "g4r/error.hpp"

namespace g4r {

std::string wrap_participant_text(const InterfaceConfig& cfg, std::string_view text) {
  std::string out;
  if (cfg.prepend_text) {
    out += *cfg.prepend_text;
    out += '\n';
  }
  out += text;
  if (cfg.append_text) {
    out += '\n';
    out += *cfg.append_text;
  }
  return out;
}

std::string unquote_wrapped_turn(const InterfaceConfig& cfg, std::string_view text, std::string reply) {
  if (!cfg.prepend_text && !cfg.append_text) return reply;
  const auto wrapped = wrap_participant_text(cfg, text);
  for (auto pos = reply.find(wrapped); pos != std::string::npos; pos = reply.find(wrapped, pos + text.size())) {
    reply.replace(pos, wrapped.size(), text);
  }
  return reply;
}

std::vector<UpstreamMessage> compose_upstream(const InterfaceConfig& cfg, std::span<const MessageExchange> history,
                                              std::string_view new_text) {
  std::vector<UpstreamMessage> out;
  out.reserve(history.size() * 2 + 3);
  if (cfg.system_prompt) out.push_back({Role::System, *cfg.system_prompt});
  if (cfg.first_message) out.push_back({Role::Assistant, *cfg.first_message});
  for (const auto& x : history) {
    out.push_back({Role::User, wrap_participant_text(cfg, x.participant_message)});
    out.push_back({Role::Assistant, x.gpt_message});
  }
  out.push_back({Role::User, wrap_participant_text(cfg, new_text)});
  return out;
}

std::int64_t remaining_quota(const ParticipantSession& session, const InterfaceConfig& cfg) noexcept {
  return std::max<std::int64_t>(0, cfg.max_messages - session.messages_sent);
}

struct ChatEngine::SessionLocks {
  std::mutex mutex;
  std::unordered_map<std::string, std::shared_ptr<std::mutex>> by_session;

  std::shared_ptr<std::mutex> get(const SessionId& id) {
    std::lock_guard lock(mutex);
    auto& slot = by_session[id.value];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
  }
};

ChatEngine::ChatEngine(Store& store, const CompletionProvider& provider, Options options)
    : store_(store), provider_(provider), options_(std::move(options)), locks_(std::make_unique<SessionLocks>()) {}

ChatEngine::~ChatEngine() = default;

ParticipantSession ChatEngine::start_session(const InterfaceId& interface_id, std::string_view participant_id) {
  return store_.open_session(interface_id, participant_id, options_.clock());
}

SendOutcome ChatEngine::handle_participant_message(const SessionId& session_id, std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "message text must not be empty");

  const auto session_mutex = locks_->get(session_id);
  std::lock_guard lock(*session_mutex);

  auto session = store_.find_session(session_id);
  if (!session) throw Error(ErrorCode::NotFound, "no session " + session_id.value);
  const auto cfg = store_.get_interface(session->interface_id);
  if (remaining_quota(*session, cfg) == 0) return CapReached{};

  const auto history = store_.session_exchanges(session_id);
  auto key = resolve_api_key(cfg, options_.server_api_key);
  if (!key) return UpstreamFailure{std::nullopt, "no api key configured for this interface or server"};

  CompletionRequest request{compose_upstream(cfg, history, text), cfg.temperature.value(), options_.model_id,
                            std::move(*key)};
  auto result = provider_.complete(request);
  if (auto* err = std::get_if<ProviderError>(&result)) return UpstreamFailure{err->kind, err->detail};

  auto exchanged_at = options_.clock();
  if (!history.empty()) exchanged_at = std::max(exchanged_at, history.back().exchanged_at);
  MessageExchange exchange{session_id, session->messages_sent + 1, std::string(text),
                           unquote_wrapped_turn(cfg, text, std::move(std::get<std::string>(result))), exchanged_at};
  store_.append_exchange(exchange, request.messages.back().content);
  return exchange;
}

}  // namespace g4r
