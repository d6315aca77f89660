#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "g4r/domain.hpp"

namespace g4r::sim {

struct ParticipantScript {
  std::string participant_id;
  std::vector<std::string> turns;
  /// 1-based turn expected to hit the cap, if any.
  std::optional<std::size_t> expected_cap_at;
};

/// Script file: CSV with header `participant_id,message[,expected_cap_at]`,
/// one row per turn in send order. A participant's rows need not be
/// adjacent; expected_cap_at may be given on any of that participant's rows.
/// Throws Error(MalformedInput).
std::vector<ParticipantScript> parse_scripts(std::string_view csv_text);

enum class TurnStatus { Reply, CapReached, UpstreamFailure, Error };

struct TurnOutcome {
  std::string text;
  TurnStatus status = TurnStatus::Error;
  int http_status = 0;
  std::string reply;  // gpt_message on Reply, the cap message on CapReached
  std::int64_t remaining = 0;
};

struct ScriptReport {
  ParticipantScript script;
  std::string session_id;
  std::vector<TurnOutcome> turns;
  std::optional<std::string> transport_error;
};

struct RunReport {
  std::vector<ScriptReport> scripts;

  /// No transport errors, and every expected_cap_at was honoured.
  bool ok() const;
  std::size_t successful_exchanges() const;
};

struct Target {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::optional<std::string> token;
};

/// Registers an account (email must be new) and signs in; returns the token.
std::string register_researcher(const Target& target, std::string_view name, std::string_view email,
                                std::string_view password);

/// Creates an interface from a JSON creation body; returns its id.
std::string create_interface(const Target& target, std::string_view config_json);

/// Drives every script through the public endpoints, at most `concurrency`
/// participants at a time; turns within one script are sequential.
RunReport run_scripts(const Target& target, std::string_view interface_id,
                      const std::vector<ParticipantScript>& scripts, std::size_t concurrency);

/// Owner download of the interface's message CSV.
std::string download_csv(const Target& target, std::string_view interface_id);

struct Discrepancy {
  std::string participant_id;
  std::string description;

  friend bool operator==(const Discrepancy&, const Discrepancy&) = default;
};

struct VerifyOptions {
  /// Check replies against the echo provider contract.
  bool expect_echo = true;
};

/// Checks that every successful turn in `report` appears exactly once in
/// `exported_csv`, in order, under its participant id, with non-decreasing
/// timestamps, and that nothing else appears. Empty result means pass.
std::vector<Discrepancy> verify_capture(const RunReport& report, std::string_view exported_csv,
                                        const VerifyOptions& options = {});

}  // namespace g4r::sim
