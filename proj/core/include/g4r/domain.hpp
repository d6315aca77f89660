#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace g4r {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

Timestamp now_utc();

/// Formats as ISO-8601 UTC with milliseconds, e.g. "2025-03-14T09:26:53.589Z".
std::string format_timestamp(Timestamp ts);
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Opaque identifier distinguished at compile time by its tag.
template <typename Tag>
struct StrongId {
  std::string value;

  bool empty() const noexcept { return value.empty(); }
  friend auto operator<=>(const StrongId&, const StrongId&) = default;
  friend bool operator==(const StrongId&, const StrongId&) = default;
};

using InterfaceId = StrongId<struct InterfaceIdTag>;
using ResearcherId = StrongId<struct ResearcherIdTag>;
using SessionId = StrongId<struct SessionIdTag>;

enum class AccessMode { NewTab, Embedded };

/// Wire names are "new_tab" and "embedded".
std::string_view to_string(AccessMode mode) noexcept;
std::optional<AccessMode> parse_access_mode(std::string_view text) noexcept;

/// A temperature keeps the text the researcher entered so "0.70" re-displays
/// as entered. Equality compares the numeric value only.
class Temperature {
 public:
  static std::optional<Temperature> parse(std::string_view text);
  static Temperature from_value(double value);

  double value() const noexcept { return value_; }
  const std::string& text() const noexcept { return text_; }

  friend bool operator==(const Temperature& a, const Temperature& b) noexcept { return a.value_ == b.value_; }

 private:
  Temperature(double value, std::string text) : value_(value), text_(std::move(text)) {}

  double value_;
  std::string text_;
};

inline constexpr std::size_t kStudyNameMaxChars = 300;
inline constexpr std::size_t kLabelMaxChars = 100;
inline constexpr std::int64_t kMaxMessagesUpperBound = 1000;
inline constexpr double kTemperatureMin = 0.0;
inline constexpr double kTemperatureMax = 2.0;

inline constexpr std::string_view kDefaultParticipantLabel = "You";
inline constexpr std::string_view kDefaultGptLabel = "ChatGPT";
inline constexpr std::string_view kDefaultFirstMessage = "What can I help with?";
inline constexpr std::string_view kDefaultTemperatureText = "1.0";
inline constexpr std::int64_t kDefaultMaxMessages = 20;
inline constexpr std::string_view kWindowTitle = "ChatGPT Interface for Prolific Studies";

/// The twelve-question definition of one GPT interface.
struct InterfaceConfig {
  InterfaceId interface_id;
  std::string study_name;
  AccessMode access_mode = AccessMode::NewTab;
  std::int64_t max_messages = kDefaultMaxMessages;
  std::string participant_label{kDefaultParticipantLabel};
  std::string gpt_label{kDefaultGptLabel};
  std::optional<std::string> system_prompt;
  std::optional<std::string> first_message;
  Temperature temperature = Temperature::from_value(1.0);
  std::optional<std::string> prepend_text;
  std::optional<std::string> append_text;
  std::optional<std::string> api_key;
  std::optional<std::string> top_html;
  std::optional<ResearcherId> owner_id;
  Timestamp created_at{};

  friend bool operator==(const InterfaceConfig&, const InterfaceConfig&) = default;
};

/// Whatever subset of the creation form was supplied. For optional text
/// fields a present empty string means "cleared", which differs from
/// "not supplied" (the first message keeps its default only when absent).
struct PartialConfig {
  std::optional<std::string> study_name;
  std::optional<AccessMode> access_mode;
  std::optional<std::int64_t> max_messages;
  std::optional<std::string> participant_label;
  std::optional<std::string> gpt_label;
  std::optional<std::string> system_prompt;
  std::optional<std::string> first_message;
  std::optional<Temperature> temperature;
  std::optional<std::string> prepend_text;
  std::optional<std::string> append_text;
  std::optional<std::string> api_key;
  std::optional<std::string> top_html;

  friend bool operator==(const PartialConfig&, const PartialConfig&) = default;
};

InterfaceConfig apply_defaults(const PartialConfig& partial);

/// Every field of `cfg` as an explicit partial; absent optionals become "".
PartialConfig to_partial(const InterfaceConfig& cfg);

enum class ConfigError {
  StudyNameTooLong,
  StudyNameEmpty,
  MaxMessagesOutOfRange,
  TemperatureOutOfRange,
  EmptyLabel,
  LabelTooLong,
  InvalidValue,
};

std::string_view to_string(ConfigError code) noexcept;

struct FieldError {
  std::string field;
  ConfigError code;
  std::string message;

  friend bool operator==(const FieldError&, const FieldError&) = default;
};

/// Returns one error per violated field; empty when `cfg` is valid.
std::vector<FieldError> validate_config(const InterfaceConfig& cfg);

struct ResearcherAccount {
  ResearcherId researcher_id;
  std::string display_name;
  std::string email;
  std::string password_hash;
  Timestamp created_at{};

  friend bool operator==(const ResearcherAccount&, const ResearcherAccount&) = default;
};

struct ParticipantSession {
  SessionId session_id;
  InterfaceId interface_id;
  std::string participant_id;
  std::int64_t messages_sent = 0;
  Timestamp started_at{};

  friend bool operator==(const ParticipantSession&, const ParticipantSession&) = default;
};

struct MessageExchange {
  SessionId session;
  std::int64_t seq = 0;
  std::string participant_message;
  std::string gpt_message;
  Timestamp exchanged_at{};

  friend bool operator==(const MessageExchange&, const MessageExchange&) = default;
};

/// An exchange together with the participant it belongs to.
struct TranscriptEntry {
  std::string participant_id;
  MessageExchange exchange;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

/// The only view of an interface that participants' browsers ever receive.
struct WidgetBootstrap {
  InterfaceId interface_id;
  AccessMode access_mode = AccessMode::NewTab;
  std::string participant_label;
  std::string gpt_label;
  std::optional<std::string> first_message;
  std::int64_t max_messages = 0;
  std::optional<std::string> top_html;
  std::string window_title;
};

WidgetBootstrap make_widget_bootstrap(const InterfaceConfig& cfg);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text) noexcept;

}  // namespace g4r
