// g4r: serve the chat service, merge/pivot message exports, and run the
// scripted participant simulation.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "g4r/credentials.hpp"
#include "g4r/error.hpp"
#include "g4r/export_merge.hpp"
#include "g4r/http_api.hpp"
#include "g4r/sim_harness.hpp"
#include "g4r/store.hpp"

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content)) throw std::runtime_error("cannot write " + path);
}

bool is_validation_error(const g4r::Error& e) {
  switch (e.code()) {
    case g4r::ErrorCode::MalformedInput:
    case g4r::ErrorCode::MissingKeyColumn:
    case g4r::ErrorCode::DuplicateSurveyKey: return true;
    default: return false;
  }
}

int serve(g4r::ServiceConfig config) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  g4r::Store store(config.db_path, g4r::load_or_create_store_key(config.db_path));
  if (const auto purged = store.purge_guest_interfaces(g4r::now_utc())) {
    spdlog::info("purged {} expired guest interface(s)", purged);
  }
  const auto provider = g4r::make_provider(config);
  if (config.upstream_url == "echo") spdlog::warn("using the echo provider; no model is called");

  g4r::Service service(config, store, *provider);
  service.start();
  spdlog::info("listening on {} (public base {})", config.bind_host + ":" + std::to_string(service.port()),
               service.base_url());
  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("shutting down");
  service.stop();
  return 0;
}

int merge(const std::string& messages, const std::string& survey, const std::string& out,
          const std::string& unmatched_path, std::size_t skip_rows) {
  const auto rows = g4r::parse_export_csv(read_file(messages));
  const auto wide = g4r::pivot_wide(rows);
  const auto table = g4r::csv::parse(read_file(survey));
  const auto result = g4r::merge_with_survey(wide, table, {skip_rows});
  write_file(out, g4r::csv::write(result.merged));
  if (!unmatched_path.empty()) {
    g4r::csv::Table unmatched{{std::string(g4r::kSurveyKeyColumn)}, {}};
    for (const auto& pid : result.unmatched) unmatched.rows.push_back({pid});
    write_file(unmatched_path, g4r::csv::write(unmatched));
  }
  std::cerr << "merged " << result.merged.rows.size() << " survey row(s) with " << wide.records.size()
            << " transcript(s), " << wide.width << " exchange column pair(s)\n";
  if (!result.unmatched.empty()) {
    std::cerr << result.unmatched.size() << " transcript participant(s) have no survey row";
    std::cerr << (unmatched_path.empty() ? " (use --unmatched to list them)\n" : "\n");
  }
  return 0;
}

int pivot(const std::string& messages, const std::string& out) {
  const auto wide = g4r::pivot_wide(g4r::parse_export_csv(read_file(messages)));
  write_file(out, g4r::csv::write(g4r::wide_to_table(wide)));
  return 0;
}

int simulate(const std::string& scripts_path, const std::string& base_url, std::size_t concurrency,
             std::optional<std::int64_t> max_messages, const std::string& config_path, bool echo_check) {
  const auto scripts = g4r::sim::parse_scripts(read_file(scripts_path));
  g4r::sim::Target target{base_url, std::nullopt};
  const auto email = "sim-" + g4r::crypto::random_alnum(12) + "@harness.invalid";
  target.token = g4r::sim::register_researcher(target, "simulation harness", email, g4r::crypto::random_alnum(24));

  auto body = config_path.empty() ? nlohmann::json::object() : nlohmann::json::parse(read_file(config_path));
  if (max_messages) body["max_messages"] = *max_messages;
  if (!body.contains("study_name")) body["study_name"] = "simulation";
  const auto interface_id = g4r::sim::create_interface(target, body.dump());
  const auto report = g4r::sim::run_scripts(target, interface_id, scripts, concurrency);
  const auto csv = g4r::sim::download_csv(target, interface_id);
  const auto discrepancies = g4r::sim::verify_capture(report, csv, {echo_check});

  for (const auto& s : report.scripts) {
    std::size_t replies = 0, caps = 0, failures = 0;
    for (const auto& t : s.turns) {
      replies += t.status == g4r::sim::TurnStatus::Reply;
      caps += t.status == g4r::sim::TurnStatus::CapReached;
      failures += t.status == g4r::sim::TurnStatus::UpstreamFailure || t.status == g4r::sim::TurnStatus::Error;
    }
    std::cout << s.script.participant_id << ": " << replies << " repl" << (replies == 1 ? "y" : "ies") << ", "
              << caps << " cap hit(s), " << failures << " failure(s)";
    if (s.transport_error) std::cout << ", transport error: " << *s.transport_error;
    std::cout << '\n';
  }
  std::cout << "interface " << interface_id << ": " << report.successful_exchanges() << " exchange(s) captured\n";
  for (const auto& d : discrepancies) std::cout << "DISCREPANCY " << d.participant_id << ": " << d.description << '\n';
  const bool pass = report.ok() && discrepancies.empty();
  std::cout << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? 0 : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"g4r: chat interfaces for research participants"};
  app.require_subcommand(1);

  auto config = g4r::service_config_from_env();
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::string bind;
  serve_cmd->add_option("--bind", bind, "host:port to listen on (G4R_BIND_ADDR)");
  serve_cmd->add_option("--db", config.db_path, "SQLite database path (G4R_DB_PATH)");
  serve_cmd->add_option("--upstream", config.upstream_url, "OpenAI-compatible base URL or \"echo\" (G4R_UPSTREAM_URL)");
  serve_cmd->add_option("--model", config.model_id, "Upstream model identifier (G4R_MODEL_ID)");
  serve_cmd->add_option("--public-url", config.public_base_url, "Public base URL for snippets (G4R_PUBLIC_URL)");
  serve_cmd->add_option("--guest-limit", config.guest_create_limit, "Guest creations per IP per day, 0 = unlimited");

  std::string messages, survey, out, unmatched;
  std::size_t skip_rows = 0;
  auto* merge_cmd = app.add_subcommand("merge", "Left-join a message export onto survey responses by g4r_pid");
  merge_cmd->add_option("--messages", messages, "Message CSV downloaded from the service")->required();
  merge_cmd->add_option("--survey", survey, "Survey response CSV with a g4r_pid column")->required();
  merge_cmd->add_option("--out", out, "Merged CSV to write")->required();
  merge_cmd->add_option("--unmatched", unmatched, "Write transcript participants missing from the survey here");
  merge_cmd->add_option("--skip-rows", skip_rows,
                        "Metadata rows under the survey header to pass through unjoined (Qualtrics exports have 2)");

  auto* pivot_cmd = app.add_subcommand("pivot", "Pivot a message export to one row per participant");
  pivot_cmd->add_option("--messages", messages, "Message CSV downloaded from the service")->required();
  pivot_cmd->add_option("--out", out, "Wide CSV to write")->required();

  std::string scripts, base_url, config_path;
  std::size_t concurrency = 1;
  std::optional<std::int64_t> max_messages;
  bool no_echo_check = false;
  auto* sim_cmd = app.add_subcommand("simulate", "Drive scripted participants through a running service");
  sim_cmd->add_option("--scripts", scripts, "Script CSV: participant_id,message[,expected_cap_at]")->required();
  sim_cmd->add_option("--base-url", base_url, "Service base URL, e.g. http://127.0.0.1:8080")->required();
  sim_cmd->add_option("--concurrency", concurrency, "Participants driven in parallel")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--max-messages", max_messages, "max_messages for the interface under test");
  sim_cmd->add_option("--config", config_path, "JSON creation body for the interface under test");
  sim_cmd->add_flag("--no-echo-check", no_echo_check, "Skip checking replies against the echo contract");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) {
      if (!bind.empty()) {
        const auto colon = bind.rfind(':');
        config.bind_host = bind.substr(0, colon);
        if (colon != std::string::npos) config.port = std::stoi(bind.substr(colon + 1));
      }
      return serve(config);
    }
    if (*merge_cmd) return merge(messages, survey, out, unmatched, skip_rows);
    if (*pivot_cmd) return pivot(messages, out);
    if (*sim_cmd) return simulate(scripts, base_url, concurrency, max_messages, config_path, !no_echo_check);
  } catch (const g4r::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_validation_error(e) ? kExitValidation : kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
