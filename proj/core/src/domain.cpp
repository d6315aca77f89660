#include "g4r/domain.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "g4r/error.hpp"

namespace g4r {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::UnknownInterface: return "UnknownInterface";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidEmail: return "InvalidEmail";
    case ErrorCode::DuplicateEmail: return "DuplicateEmail";
    case ErrorCode::WeakPassword: return "WeakPassword";
    case ErrorCode::AuthFailed: return "AuthFailed";
    case ErrorCode::SequenceGap: return "SequenceGap";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::MissingKeyColumn: return "MissingKeyColumn";
    case ErrorCode::DuplicateSurveyKey: return "DuplicateSurveyKey";
    case ErrorCode::Storage: return "Storage";
    case ErrorCode::Crypto: return "Crypto";
  }
  return "Unknown";
}

Timestamp now_utc() {
  return std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  const year_month_day ymd{day};
  const hh_mm_ss<milliseconds> tod{ts - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()), static_cast<int>(tod.subseconds().count()));
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  // YYYY-MM-DDTHH:MM:SS.mmmZ
  if (text.size() != 24 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':' || text[19] != '.' || text[23] != 'Z') {
    return std::nullopt;
  }
  auto field = [&](std::size_t pos, std::size_t len, int& out) {
    const auto* first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, out);
    return ec == std::errc{} && ptr == first + len;
  };
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, ms = 0;
  if (!field(0, 4, y) || !field(5, 2, mo) || !field(8, 2, d) || !field(11, 2, h) || !field(14, 2, mi) ||
      !field(17, 2, s) || !field(20, 3, ms)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms};
}

std::string_view to_string(AccessMode mode) noexcept {
  return mode == AccessMode::NewTab ? "new_tab" : "embedded";
}

std::optional<AccessMode> parse_access_mode(std::string_view text) noexcept {
  if (text == "new_tab") return AccessMode::NewTab;
  if (text == "embedded") return AccessMode::Embedded;
  return std::nullopt;
}

std::optional<Temperature> Temperature::parse(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), last, value, std::chars_format::general);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
  return Temperature(value, std::string(text));
}

Temperature Temperature::from_value(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  std::string text(buf, ec == std::errc{} ? ptr : buf);
  if (text.find_first_of(".eEn") == std::string::npos) text += ".0";
  return Temperature(value, std::move(text));
}

namespace {

std::optional<std::string> normalized(const std::optional<std::string>& text) {
  if (!text || text->empty()) return std::nullopt;
  return text;
}

}  // namespace

InterfaceConfig apply_defaults(const PartialConfig& partial) {
  InterfaceConfig cfg;
  cfg.study_name = partial.study_name.value_or("");
  cfg.access_mode = partial.access_mode.value_or(AccessMode::NewTab);
  cfg.max_messages = partial.max_messages.value_or(kDefaultMaxMessages);
  cfg.participant_label = partial.participant_label.value_or(std::string(kDefaultParticipantLabel));
  cfg.gpt_label = partial.gpt_label.value_or(std::string(kDefaultGptLabel));
  cfg.system_prompt = normalized(partial.system_prompt);
  cfg.first_message =
      partial.first_message ? normalized(partial.first_message) : std::optional<std::string>(kDefaultFirstMessage);
  cfg.temperature = partial.temperature.value_or(*Temperature::parse(kDefaultTemperatureText));
  cfg.prepend_text = normalized(partial.prepend_text);
  cfg.append_text = normalized(partial.append_text);
  cfg.api_key = normalized(partial.api_key);
  cfg.top_html = normalized(partial.top_html);
  return cfg;
}

PartialConfig to_partial(const InterfaceConfig& cfg) {
  PartialConfig p;
  p.study_name = cfg.study_name;
  p.access_mode = cfg.access_mode;
  p.max_messages = cfg.max_messages;
  p.participant_label = cfg.participant_label;
  p.gpt_label = cfg.gpt_label;
  p.system_prompt = cfg.system_prompt.value_or("");
  p.first_message = cfg.first_message.value_or("");
  p.temperature = cfg.temperature;
  p.prepend_text = cfg.prepend_text.value_or("");
  p.append_text = cfg.append_text.value_or("");
  p.api_key = cfg.api_key.value_or("");
  p.top_html = cfg.top_html.value_or("");
  return p;
}

std::string_view to_string(ConfigError code) noexcept {
  switch (code) {
    case ConfigError::StudyNameTooLong: return "StudyNameTooLong";
    case ConfigError::StudyNameEmpty: return "StudyNameEmpty";
    case ConfigError::MaxMessagesOutOfRange: return "MaxMessagesOutOfRange";
    case ConfigError::TemperatureOutOfRange: return "TemperatureOutOfRange";
    case ConfigError::EmptyLabel: return "EmptyLabel";
    case ConfigError::LabelTooLong: return "LabelTooLong";
    case ConfigError::InvalidValue: return "InvalidValue";
  }
  return "Unknown";
}

std::vector<FieldError> validate_config(const InterfaceConfig& cfg) {
  std::vector<FieldError> errors;
  const auto name_len = utf8_length(cfg.study_name);
  if (name_len == 0) {
    errors.push_back({"study_name", ConfigError::StudyNameEmpty, "study name is required"});
  } else if (name_len > kStudyNameMaxChars) {
    errors.push_back({"study_name", ConfigError::StudyNameTooLong,
                      "study name must be at most " + std::to_string(kStudyNameMaxChars) + " characters"});
  }
  if (cfg.max_messages < 0 || cfg.max_messages > kMaxMessagesUpperBound) {
    errors.push_back({"max_messages", ConfigError::MaxMessagesOutOfRange,
                      "max_messages must be between 0 and " + std::to_string(kMaxMessagesUpperBound)});
  }
  const double t = cfg.temperature.value();
  if (!(t >= kTemperatureMin && t <= kTemperatureMax)) {
    errors.push_back({"temperature", ConfigError::TemperatureOutOfRange,
                      "temperature must be between 0.0 and 2.0 (inclusive)"});
  }
  auto check_label = [&](const char* field, const std::string& label) {
    const auto len = utf8_length(label);
    if (len == 0) {
      errors.push_back({field, ConfigError::EmptyLabel, "label must not be empty"});
    } else if (len > kLabelMaxChars) {
      errors.push_back({field, ConfigError::LabelTooLong,
                        "label must be at most " + std::to_string(kLabelMaxChars) + " characters"});
    }
  };
  check_label("participant_label", cfg.participant_label);
  check_label("gpt_label", cfg.gpt_label);
  return errors;
}

WidgetBootstrap make_widget_bootstrap(const InterfaceConfig& cfg) {
  WidgetBootstrap b;
  b.interface_id = cfg.interface_id;
  b.access_mode = cfg.access_mode;
  b.participant_label = cfg.participant_label;
  b.gpt_label = cfg.gpt_label;
  b.first_message = cfg.first_message;
  b.max_messages = cfg.max_messages;
  if (cfg.access_mode == AccessMode::NewTab) b.top_html = cfg.top_html;
  b.window_title = std::string(kWindowTitle);
  return b;
}

std::size_t utf8_length(std::string_view text) noexcept {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

}  // namespace g4r
