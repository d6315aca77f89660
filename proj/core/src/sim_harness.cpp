#include "g4r/sim_harness.hpp"

#include <httplib.h>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <map>
#include <thread>
#include <unordered_map>

#include "g4r/csv.hpp"
#include "g4r/error.hpp"
#include "g4r/export_merge.hpp"
#include "g4r/llm_gateway.hpp"

namespace g4r::sim {

using nlohmann::json;

namespace {

httplib::Client make_client(const Target& target) {
  httplib::Client client(target.base_url);
  client.set_connection_timeout(std::chrono::seconds{10});
  client.set_read_timeout(std::chrono::seconds{120});
  if (target.token) client.set_bearer_token_auth(*target.token);
  return client;
}

[[noreturn]] void transport_failure(std::string_view what, const httplib::Result& res) {
  std::string detail = res ? "HTTP " + std::to_string(res->status) + ": " + res->body : httplib::to_string(res.error());
  throw Error(ErrorCode::InvalidArgument, std::string(what) + " failed: " + detail);
}

std::string describe_seq(const std::string& pid, std::size_t seq) {
  return "(" + pid + ", " + std::to_string(seq) + ")";
}

}  // namespace

std::vector<ParticipantScript> parse_scripts(std::string_view csv_text) {
  const auto table = csv::parse(csv_text);
  const auto col = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const auto pid_col = col("participant_id");
  const auto msg_col = col("message");
  const auto cap_col = col("expected_cap_at");
  if (!pid_col || !msg_col) {
    throw Error(ErrorCode::MalformedInput, "script file needs participant_id and message columns");
  }

  std::vector<ParticipantScript> scripts;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto line = std::to_string(i + 2);
    if (row.size() <= std::max(*pid_col, *msg_col)) {
      throw Error(ErrorCode::MalformedInput, "script row " + line + " has too few columns");
    }
    const auto& pid = row[*pid_col];
    if (pid.empty()) throw Error(ErrorCode::MalformedInput, "script row " + line + " has no participant_id");
    auto [it, inserted] = slot.try_emplace(pid, scripts.size());
    if (inserted) scripts.push_back({pid, {}, std::nullopt});
    auto& script = scripts[it->second];
    if (!row[*msg_col].empty()) script.turns.push_back(row[*msg_col]);
    if (cap_col && *cap_col < row.size() && !row[*cap_col].empty()) {
      std::size_t cap = 0;
      const auto& s = row[*cap_col];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
      if (ec != std::errc{} || ptr != s.data() + s.size() || cap == 0) {
        throw Error(ErrorCode::MalformedInput, "script row " + line + " has a bad expected_cap_at");
      }
      script.expected_cap_at = cap;
    }
  }
  return scripts;
}

bool RunReport::ok() const {
  for (const auto& s : scripts) {
    if (s.transport_error || s.turns.size() != s.script.turns.size()) return false;
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const bool capped = s.script.expected_cap_at && i + 1 >= *s.script.expected_cap_at;
      const auto want = capped ? TurnStatus::CapReached : TurnStatus::Reply;
      if (s.turns[i].status != want) return false;
    }
  }
  return true;
}

std::size_t RunReport::successful_exchanges() const {
  std::size_t n = 0;
  for (const auto& s : scripts) {
    n += static_cast<std::size_t>(std::count_if(s.turns.begin(), s.turns.end(),
                                                [](const TurnOutcome& t) { return t.status == TurnStatus::Reply; }));
  }
  return n;
}

std::string register_researcher(const Target& target, std::string_view name, std::string_view email,
                                std::string_view password) {
  auto client = make_client(target);
  const json account = {{"name", name}, {"email", email}, {"password", password}};
  auto created = client.Post("/api/accounts", account.dump(), "application/json");
  if (!created || created->status != 201) transport_failure("account creation", created);
  const json signin = {{"email", email}, {"password", password}};
  auto res = client.Post("/api/signin", signin.dump(), "application/json");
  if (!res || res->status != 200) transport_failure("sign-in", res);
  return json::parse(res->body).at("token").get<std::string>();
}

std::string create_interface(const Target& target, std::string_view config_json) {
  auto client = make_client(target);
  auto res = client.Post("/api/interfaces", std::string(config_json), "application/json");
  if (!res || res->status != 201) transport_failure("interface creation", res);
  return json::parse(res->body).at("interface_id").get<std::string>();
}

std::string download_csv(const Target& target, std::string_view interface_id) {
  auto client = make_client(target);
  auto res = client.Get("/api/interfaces/" + std::string(interface_id) + "/messages.csv");
  if (!res || res->status != 200) transport_failure("download", res);
  return res->body;
}

RunReport run_scripts(const Target& target, std::string_view interface_id,
                      const std::vector<ParticipantScript>& scripts, std::size_t concurrency) {
  RunReport report;
  report.scripts.resize(scripts.size());
  std::atomic<std::size_t> next{0};
  const std::string iface(interface_id);

  auto worker = [&] {
    auto client = make_client(target);
    for (std::size_t i = next++; i < scripts.size(); i = next++) {
      auto& out = report.scripts[i];
      out.script = scripts[i];
      const json open = {{"participant_id", out.script.participant_id}};
      auto res = client.Post("/api/interfaces/" + iface + "/sessions", open.dump(), "application/json");
      if (!res || res->status != 200) {
        out.transport_error = res ? "session open returned HTTP " + std::to_string(res->status)
                                  : "session open: " + httplib::to_string(res.error());
        continue;
      }
      out.session_id = json::parse(res->body).at("session_id").get<std::string>();
      for (const auto& text : out.script.turns) {
        TurnOutcome turn;
        turn.text = text;
        auto sent = client.Post("/api/sessions/" + out.session_id + "/messages", json{{"text", text}}.dump(),
                                "application/json");
        if (!sent) {
          out.transport_error = "send: " + httplib::to_string(sent.error());
          break;
        }
        turn.http_status = sent->status;
        if (sent->status == 200) {
          const auto body = json::parse(sent->body);
          turn.status = TurnStatus::Reply;
          turn.reply = body.at("gpt_message").get<std::string>();
          turn.remaining = body.at("remaining_quota").get<std::int64_t>();
        } else if (sent->status == 409) {
          turn.status = TurnStatus::CapReached;
          turn.reply = sent->body;
        } else if (sent->status == 502) {
          turn.status = TurnStatus::UpstreamFailure;
        } else {
          turn.status = TurnStatus::Error;
          turn.reply = sent->body;
        }
        out.turns.push_back(std::move(turn));
      }
    }
  };

  const auto threads = std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(1, scripts.size()));
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  return report;
}

std::vector<Discrepancy> verify_capture(const RunReport& report, std::string_view exported_csv,
                                        const VerifyOptions& options) {
  std::vector<Discrepancy> found;
  std::vector<ExportRow> rows;
  try {
    rows = parse_export_csv(exported_csv);
  } catch (const Error& e) {
    return {{"", std::string("export is not readable: ") + e.what()}};
  }

  std::map<std::string, std::vector<const ExportRow*>> by_pid;
  for (const auto& r : rows) by_pid[r.participant_id].push_back(&r);

  for (const auto& s : report.scripts) {
    const auto& pid = s.script.participant_id;
    std::vector<const TurnOutcome*> expected;
    for (const auto& t : s.turns) {
      if (t.status == TurnStatus::Reply) expected.push_back(&t);
    }
    const auto node = by_pid.find(pid);
    const std::vector<const ExportRow*> none;
    const auto& actual = node == by_pid.end() ? none : node->second;

    std::map<std::string, std::vector<std::size_t>> want_positions;
    for (std::size_t i = 0; i < expected.size(); ++i) want_positions[expected[i]->text].push_back(i + 1);
    std::map<std::string, std::size_t> have_count;
    for (const auto* r : actual) ++have_count[r->message_to_gpt];

    bool same_multiset = true;
    for (const auto& [text, positions] : want_positions) {
      const auto have = have_count[text];
      for (std::size_t k = have; k < positions.size(); ++k) {
        found.push_back({pid, "missing exchange " + describe_seq(pid, positions[k])});
        same_multiset = false;
      }
      if (have > positions.size()) {
        found.push_back({pid, "duplicate exchange for turn " + describe_seq(pid, positions.front())});
        same_multiset = false;
      }
    }
    for (const auto& [text, count] : have_count) {
      if (count > 0 && !want_positions.contains(text)) {
        found.push_back({pid, "unexpected exchange \"" + text + "\""});
        same_multiset = false;
      }
    }
    if (!same_multiset) continue;

    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (actual[i]->message_to_gpt != expected[i]->text) {
        found.push_back({pid, "ordering: exchange " + describe_seq(pid, i + 1) + " is out of seq order"});
        break;
      }
    }
    std::optional<Timestamp> previous;
    for (std::size_t i = 0; i < actual.size(); ++i) {
      const auto* r = actual[i];
      if (r->message_from_gpt != expected[i]->reply) {
        found.push_back({pid, "reply mismatch at " + describe_seq(pid, i + 1)});
      } else if (options.expect_echo && r->message_from_gpt != std::string(kEchoPrefix) + r->message_to_gpt) {
        found.push_back({pid, "reply at " + describe_seq(pid, i + 1) + " breaks the echo contract"});
      }
      const auto ts = parse_timestamp(r->timestamp);
      if (!ts) {
        found.push_back({pid, "bad timestamp at " + describe_seq(pid, i + 1)});
      } else {
        if (previous && *ts < *previous) {
          found.push_back({pid, "timestamp decreases at " + describe_seq(pid, i + 1)});
        }
        previous = ts;
      }
    }
  }

  for (const auto& [pid, list] : by_pid) {
    const bool known = std::any_of(report.scripts.begin(), report.scripts.end(),
                                   [&](const ScriptReport& s) { return s.script.participant_id == pid; });
    if (!known) found.push_back({pid, "unexpected participant with " + std::to_string(list.size()) + " exchange(s)"});
  }
  return found;
}

}  // namespace g4r::sim
