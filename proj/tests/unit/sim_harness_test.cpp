#include <gtest/gtest.h>

#include "g4r/error.hpp"
#include "g4r/export_merge.hpp"
#include "g4r/http_api.hpp"
#include "g4r/sim_harness.hpp"
#include "test_support.hpp"

namespace g4r::sim {
namespace {

bool mentions(const std::vector<Discrepancy>& found, std::string_view text) {
  for (const auto& d : found) {
    if (d.description.find(text) != std::string::npos) return true;
  }
  return false;
}

TEST(Scripts, ParseGroupsTurnsByParticipant) {
  const auto scripts = parse_scripts(
      "participant_id,message,expected_cap_at\n"
      "a,one,\n"
      "b,\"x, y\",\n"
      "a,two,3\n"
      "a,three,\n");
  ASSERT_EQ(scripts.size(), 2u);
  EXPECT_EQ(scripts[0].turns, (std::vector<std::string>{"one", "two", "three"}));
  EXPECT_EQ(scripts[0].expected_cap_at, 3u);
  EXPECT_EQ(scripts[1].turns, (std::vector<std::string>{"x, y"}));
  EXPECT_THROW(parse_scripts("pid,text\na,b\n"), Error);
  EXPECT_THROW(parse_scripts("participant_id,message,expected_cap_at\na,b,zero\n"), Error);
  EXPECT_THROW(parse_scripts("participant_id,message\n,b\n"), Error);
}

class HarnessTest : public ::testing::Test {
 protected:
  HarnessTest() : store(dir / "g4r.db", g4r::testing::fixed_key()) {
    ServiceConfig config;
    config.port = 0;
    config.upstream_url = "echo";
    service = std::make_unique<Service>(config, store, echo);
    service->start();
    target.base_url = service->base_url();
    target.token = register_researcher(target, "Harness", "h@example.org", "longenough");
  }

  g4r::testing::TempDir dir;
  Store store;
  EchoProvider echo;
  std::unique_ptr<Service> service;
  Target target;
};

TEST_F(HarnessTest, CleanRunVerifiesAndTamperingIsDetected) {
  const auto id = create_interface(target, R"({"study_name":"harness","max_messages":3})");
  const auto scripts = parse_scripts(
      "participant_id,message,expected_cap_at\n"
      "p1,alpha,\np1,beta,\np1,gamma,\np1,delta,4\n"
      "p2,\"comma, here\",\np2,\"multi\nline\",\n");
  const auto report = run_scripts(target, id, scripts, 1);
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.successful_exchanges(), 5u);
  const auto csv_text = download_csv(target, id);
  EXPECT_TRUE(verify_capture(report, csv_text).empty());

  auto rows = parse_export_csv(csv_text);
  ASSERT_EQ(rows.size(), 5u);

  auto deleted = rows;
  deleted.erase(deleted.begin() + 1);
  const auto missing = verify_capture(report, export_csv(deleted));
  EXPECT_TRUE(mentions(missing, "missing exchange (p1, 2)"));

  auto swapped = rows;
  std::swap(swapped[0], swapped[1]);
  EXPECT_TRUE(mentions(verify_capture(report, export_csv(swapped)), "ordering"));

  auto duplicated = rows;
  duplicated.push_back(rows[3]);
  EXPECT_TRUE(mentions(verify_capture(report, export_csv(duplicated)), "duplicate"));

  auto stranger = rows;
  stranger.push_back({"intruder", "x", "echo: x", rows[0].timestamp});
  EXPECT_TRUE(mentions(verify_capture(report, export_csv(stranger)), "unexpected participant"));

  auto altered = rows;
  altered[2].message_from_gpt = "not the reply";
  EXPECT_TRUE(mentions(verify_capture(report, export_csv(altered)), "reply mismatch"));

  auto backwards = rows;
  backwards[1].timestamp = "2000-01-01T00:00:00.000Z";
  EXPECT_TRUE(mentions(verify_capture(report, export_csv(backwards)), "timestamp decreases"));
}

TEST_F(HarnessTest, UnexpectedCapFailsTheRun) {
  const auto id = create_interface(target, R"({"study_name":"cap","max_messages":1})");
  const auto report = run_scripts(target, id, parse_scripts("participant_id,message\nq,one\nq,two\n"), 1);
  EXPECT_FALSE(report.ok());
  EXPECT_EQ(report.scripts[0].turns[1].status, TurnStatus::CapReached);
  EXPECT_EQ(report.scripts[0].turns[1].reply, "You have sent the maximum allowed messages");
}

}  // namespace
}  // namespace g4r::sim
