#include "json_codec.hpp"

#include <charconv>
#include <cmath>

namespace g4r::codec {

using nlohmann::json;

namespace {

json optional_text(const std::optional<std::string>& text) {
  return text ? json(*text) : json(nullptr);
}

std::optional<std::string> read_optional_text(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

json config_to_json(const InterfaceConfig& cfg) {
  return {
      {"interface_id", cfg.interface_id.value},
      {"study_name", cfg.study_name},
      {"access_mode", to_string(cfg.access_mode)},
      {"max_messages", cfg.max_messages},
      {"participant_label", cfg.participant_label},
      {"gpt_label", cfg.gpt_label},
      {"system_prompt", optional_text(cfg.system_prompt)},
      {"first_message", optional_text(cfg.first_message)},
      {"temperature", cfg.temperature.value()},
      {"temperature_text", cfg.temperature.text()},
      {"prepend_text", optional_text(cfg.prepend_text)},
      {"append_text", optional_text(cfg.append_text)},
      {"top_html", optional_text(cfg.top_html)},
      {"owner_id", cfg.owner_id ? json(cfg.owner_id->value) : json(nullptr)},
      {"created_at", format_timestamp(cfg.created_at)},
  };
}

InterfaceConfig config_from_json(const json& doc) {
  InterfaceConfig cfg;
  cfg.interface_id = InterfaceId{doc.at("interface_id").get<std::string>()};
  cfg.study_name = doc.at("study_name").get<std::string>();
  cfg.access_mode = parse_access_mode(doc.at("access_mode").get<std::string>()).value_or(AccessMode::NewTab);
  cfg.max_messages = doc.at("max_messages").get<std::int64_t>();
  cfg.participant_label = doc.at("participant_label").get<std::string>();
  cfg.gpt_label = doc.at("gpt_label").get<std::string>();
  cfg.system_prompt = read_optional_text(doc, "system_prompt");
  cfg.first_message = read_optional_text(doc, "first_message");
  const auto temp_text = doc.at("temperature_text").get<std::string>();
  cfg.temperature = Temperature::parse(temp_text).value_or(Temperature::from_value(doc.at("temperature").get<double>()));
  cfg.prepend_text = read_optional_text(doc, "prepend_text");
  cfg.append_text = read_optional_text(doc, "append_text");
  cfg.top_html = read_optional_text(doc, "top_html");
  if (auto owner = read_optional_text(doc, "owner_id")) cfg.owner_id = ResearcherId{*owner};
  if (auto ts = parse_timestamp(doc.at("created_at").get<std::string>())) cfg.created_at = *ts;
  return cfg;
}

PartialConfig partial_from_json(const json& doc, std::vector<FieldError>& errors) {
  PartialConfig p;
  if (!doc.is_object()) {
    errors.push_back({"body", ConfigError::InvalidValue, "request body must be a JSON object"});
    return p;
  }
  auto invalid = [&](const char* field, std::string message) {
    errors.push_back({field, ConfigError::InvalidValue, std::move(message)});
  };
  // `nullable` fields map JSON null to "" (cleared); the rest treat null as absent.
  auto text = [&](const char* field, std::optional<std::string>& out, bool nullable) {
    const auto it = doc.find(field);
    if (it == doc.end()) return;
    if (it->is_null()) {
      if (nullable) out = std::string();
    } else if (it->is_string()) {
      out = it->get<std::string>();
    } else {
      invalid(field, "must be a string");
    }
  };
  text("study_name", p.study_name, false);
  text("participant_label", p.participant_label, false);
  text("gpt_label", p.gpt_label, false);
  text("system_prompt", p.system_prompt, true);
  text("first_message", p.first_message, true);
  text("prepend_text", p.prepend_text, true);
  text("append_text", p.append_text, true);
  text("api_key", p.api_key, true);
  text("top_html", p.top_html, true);

  if (const auto it = doc.find("access_mode"); it != doc.end() && !it->is_null()) {
    auto mode = it->is_string() ? parse_access_mode(it->get<std::string>()) : std::nullopt;
    if (mode) {
      p.access_mode = mode;
    } else {
      invalid("access_mode", "must be \"new_tab\" or \"embedded\"");
    }
  }

  if (const auto it = doc.find("max_messages"); it != doc.end() && !it->is_null()) {
    if (it->is_number_integer()) {
      p.max_messages = it->get<std::int64_t>();
    } else if (it->is_number_float()) {
      const double v = it->get<double>();
      if (std::trunc(v) == v && std::abs(v) < 1e15) {
        p.max_messages = static_cast<std::int64_t>(v);
      } else {
        invalid("max_messages", "must be a whole number");
      }
    } else if (it->is_string()) {
      const auto s = it->get<std::string>();
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec == std::errc{} && ptr == s.data() + s.size() && !s.empty()) {
        p.max_messages = v;
      } else {
        invalid("max_messages", "must be a whole number");
      }
    } else {
      invalid("max_messages", "must be a whole number");
    }
  }

  if (const auto it = doc.find("temperature"); it != doc.end() && !it->is_null()) {
    if (it->is_number()) {
      p.temperature = Temperature::from_value(it->get<double>());
    } else if (it->is_string()) {
      p.temperature = Temperature::parse(it->get<std::string>());
      if (!p.temperature) invalid("temperature", "must be a number");
    } else {
      invalid("temperature", "must be a number");
    }
  }
  return p;
}

json bootstrap_to_json(const WidgetBootstrap& b) {
  json out = {
      {"interface_id", b.interface_id.value},
      {"access_mode", to_string(b.access_mode)},
      {"participant_label", b.participant_label},
      {"gpt_label", b.gpt_label},
      {"first_message", optional_text(b.first_message)},
      {"max_messages", b.max_messages},
      {"window_title", b.window_title},
  };
  if (b.top_html) out["top_html"] = *b.top_html;
  return out;
}

json field_errors_to_json(const std::vector<FieldError>& errors) {
  json out = json::array();
  for (const auto& e : errors) {
    out.push_back({{"field", e.field}, {"code", to_string(e.code)}, {"message", e.message}});
  }
  return out;
}

}  // namespace g4r::codec
