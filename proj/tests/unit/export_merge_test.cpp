#include <gtest/gtest.h>

#include <map>
#include <random>

#include "g4r/error.hpp"
#include "g4r/export_merge.hpp"
#include "merge_instances.hpp"

namespace g4r {
namespace {

std::vector<ExportRow> rows_of(const std::vector<oracle::Message>& messages) {
  std::vector<ExportRow> rows;
  for (const auto& m : messages) rows.push_back({m.pid, m.to_gpt, m.from_gpt, m.timestamp});
  return rows;
}

TEST(Export, HeaderAndRows) {
  EXPECT_EQ(export_header(), (csv::Row{"participant_id", "message_to_gpt", "message_from_gpt", "timestamp"}));
  std::vector<TranscriptEntry> transcript{
      {"p1", {SessionId{"s"}, 1, "hi, there", "echo: hi", Timestamp{std::chrono::milliseconds{0}}}},
  };
  const auto rows = to_export_rows(transcript);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].timestamp, "1970-01-01T00:00:00.000Z");
  EXPECT_EQ(export_csv(rows),
            "participant_id,message_to_gpt,message_from_gpt,timestamp\r\n"
            "p1,\"hi, there\",echo: hi,1970-01-01T00:00:00.000Z\r\n");
  EXPECT_EQ(parse_export_csv(export_csv(rows)), rows);
}

TEST(Export, ParseFindsColumnsByName) {
  const auto rows = parse_export_csv("timestamp,extra,participant_id,message_from_gpt,message_to_gpt\n"
                                     "t,?,p,from,to\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], (ExportRow{"p", "to", "from", "t"}));
  EXPECT_THROW(parse_export_csv("participant_id,message_to_gpt\np,x\n"), Error);
  EXPECT_THROW(parse_export_csv("participant_id,message_to_gpt,message_from_gpt,timestamp\np,x\n"), Error);
}

TEST(Pivot, WorkedExample) {
  const std::vector<ExportRow> rows{
      {"A", "a1", "r-a1", "t1"}, {"B", "b1", "r-b1", "t2"}, {"A", "a2", "r-a2", "t3"}, {"A", "a3", "r-a3", "t4"}};
  const auto wide = pivot_wide(rows);
  EXPECT_EQ(wide.width, 3u);
  ASSERT_EQ(wide.records.size(), 2u);
  EXPECT_EQ(wide.records[0].g4r_pid, "A");
  EXPECT_EQ(wide.records[1].exchanges.size(), 1u);

  const auto t = wide_to_table(wide);
  EXPECT_EQ(t.header, (csv::Row{"g4r_pid", "message_to_gpt_1", "message_from_gpt_1", "message_to_gpt_2",
                                "message_from_gpt_2", "message_to_gpt_3", "message_from_gpt_3"}));
  EXPECT_EQ(t.rows[1], (csv::Row{"B", "b1", "r-b1", "", "", "", ""}));
  EXPECT_EQ(to_gpt_column(12), "message_to_gpt_12");
  EXPECT_EQ(from_gpt_column(1), "message_from_gpt_1");
}

TEST(Pivot, FlattenIsLeftInverseOnGroupedRows) {
  for (std::uint32_t seed = 0; seed < 200; ++seed) {
    auto inst = oracle::random_instance(seed);
    // Group by first appearance, which is the order the service exports in.
    std::map<std::string, std::size_t> first_seen;
    for (const auto& m : inst.messages) first_seen.try_emplace(m.pid, first_seen.size());
    std::stable_sort(inst.messages.begin(), inst.messages.end(),
                     [&](const auto& a, const auto& b) { return first_seen[a.pid] < first_seen[b.pid]; });
    const auto rows = rows_of(inst.messages);
    EXPECT_EQ(flatten(pivot_wide(rows)), rows) << seed;
  }
}

TEST(Merge, MatchesNestedLoopOracle) {
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    const auto inst = oracle::random_instance(seed);
    const auto expected = oracle::merge(inst.messages, inst.survey, inst.skip_rows);

    const auto exported = export_csv(rows_of(inst.messages));
    const auto survey = csv::parse(oracle::to_csv(inst.survey.header, inst.survey.rows));
    const auto result = merge_with_survey(pivot_wide(parse_export_csv(exported)), survey, {inst.skip_rows});
    ASSERT_EQ(csv::write(result.merged), oracle::to_csv(expected.header, expected.rows)) << "seed " << seed;
    EXPECT_EQ(result.unmatched, expected.unmatched) << "seed " << seed;
  }
}

TEST(Merge, LeftJoinKeepsEverySurveyRow) {
  const std::vector<ExportRow> rows{{"A", "hi", "echo: hi", "t"}, {"Z", "lost", "echo: lost", "t"}};
  const csv::Table survey{{"Q1", "g4r_pid"}, {{"yes", "B"}, {"no", "A"}, {"maybe", ""}}};
  const auto out = merge_with_survey(pivot_wide(rows), survey);
  EXPECT_EQ(out.merged.header, (csv::Row{"Q1", "g4r_pid", "message_to_gpt_1", "message_from_gpt_1"}));
  EXPECT_EQ(out.merged.rows[0], (csv::Row{"yes", "B", "", ""}));
  EXPECT_EQ(out.merged.rows[1], (csv::Row{"no", "A", "hi", "echo: hi"}));
  EXPECT_EQ(out.merged.rows[2], (csv::Row{"maybe", "", "", ""}));
  EXPECT_EQ(out.unmatched, (std::vector<std::string>{"Z"}));
}

TEST(Merge, SkipRowsPassThroughUnjoined) {
  const std::vector<ExportRow> rows{{"g4r_pid", "x", "y", "t"}};
  const csv::Table survey{{"g4r_pid"}, {{"g4r_pid"}, {"{\"ImportId\":\"g4r_pid\"}"}}};
  const auto out = merge_with_survey(pivot_wide(rows), survey, {1});
  EXPECT_EQ(out.merged.rows[0], (csv::Row{"g4r_pid", "", ""}));
  const auto joined = merge_with_survey(pivot_wide(rows), survey, {0});
  EXPECT_EQ(joined.merged.rows[0], (csv::Row{"g4r_pid", "x", "y"}));
}

TEST(Merge, ErrorsNameTheProblem) {
  const auto wide = pivot_wide(std::vector<ExportRow>{{"A", "x", "y", "t"}});
  try {
    merge_with_survey(wide, {{"pid"}, {{"A"}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingKeyColumn);
  }
  try {
    merge_with_survey(wide, {{"Q", "g4r_pid"}, {{"1", "A"}, {"2", "B"}, {"3", "A"}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateSurveyKey);
    EXPECT_NE(std::string(e.what()).find("rows 2 and 4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(merge_with_survey(wide, {{"g4r_pid"}, {{"A", "extra"}}}), Error);
}

TEST(Merge, EmptyTranscriptAddsNoColumns) {
  const csv::Table survey{{"g4r_pid", "Q"}, {{"A", "1"}}};
  const auto out = merge_with_survey(pivot_wide(std::vector<ExportRow>{}), survey);
  EXPECT_EQ(out.merged, survey);
}

}  // namespace
}  // namespace g4r
