#pragma once

// JSON encodings shared by the store and the HTTP layer.

#include <json.hpp>

#include <vector>

#include "g4r/domain.hpp"

namespace g4r::codec {

/// Every config field except api_key, with the fixed wire names.
nlohmann::json config_to_json(const InterfaceConfig& cfg);
/// Inverse of config_to_json (api_key left absent). Throws nlohmann::json::exception.
InterfaceConfig config_from_json(const nlohmann::json& doc);

/// Parses a creation-form body. Ill-typed fields are reported in `errors`
/// with ConfigError::InvalidValue and otherwise ignored.
PartialConfig partial_from_json(const nlohmann::json& doc, std::vector<FieldError>& errors);

nlohmann::json bootstrap_to_json(const WidgetBootstrap& b);

nlohmann::json field_errors_to_json(const std::vector<FieldError>& errors);

}  // namespace g4r::codec
