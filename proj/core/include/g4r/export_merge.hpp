#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "g4r/csv.hpp"
#include "g4r/domain.hpp"

namespace g4r {

inline constexpr std::string_view kSurveyKeyColumn = "g4r_pid";

/// Header of the downloadable message file.
const csv::Row& export_header();

struct ExportRow {
  std::string participant_id;
  std::string message_to_gpt;
  std::string message_from_gpt;
  std::string timestamp;  // ISO-8601 UTC with milliseconds

  friend bool operator==(const ExportRow&, const ExportRow&) = default;
};

/// One row per exchange, in the order given (the store already groups by
/// participant in first-seen order and sorts by seq).
std::vector<ExportRow> to_export_rows(std::span<const TranscriptEntry> transcript);

std::string export_csv(std::span<const ExportRow> rows);

/// Reads a message file. Columns are located by header name, so extra
/// columns are ignored. Throws Error(MalformedInput) when a required column
/// is missing or a row is short.
std::vector<ExportRow> parse_export_csv(std::string_view text);

/// Column names for exchange `n` (1-based): message_to_gpt_n / message_from_gpt_n.
std::string to_gpt_column(std::size_t n);
std::string from_gpt_column(std::size_t n);

struct WideExchange {
  std::string message_to_gpt;
  std::string message_from_gpt;
  std::string timestamp;  // kept so the pivot can be undone; not emitted as a column

  friend bool operator==(const WideExchange&, const WideExchange&) = default;
};

struct WideRecord {
  std::string g4r_pid;
  std::vector<WideExchange> exchanges;

  friend bool operator==(const WideRecord&, const WideRecord&) = default;
};

struct WideTable {
  std::size_t width = 0;  // K, the largest exchange count of any participant
  std::vector<WideRecord> records;

  friend bool operator==(const WideTable&, const WideTable&) = default;
};

/// One record per distinct participant in first-seen order.
WideTable pivot_wide(std::span<const ExportRow> rows);

/// Inverse of pivot_wide.
std::vector<ExportRow> flatten(const WideTable& wide);

/// `g4r_pid, message_to_gpt_1, message_from_gpt_1, ...` with empty cells
/// past each participant's last exchange.
csv::Table wide_to_table(const WideTable& wide);

struct MergeOptions {
  /// Rows directly under the survey header that are metadata rather than
  /// responses. They are copied through with empty message cells.
  std::size_t skip_rows = 0;
};

struct MergeResult {
  csv::Table merged;
  /// Transcript participants with no survey row, in first-seen order.
  std::vector<std::string> unmatched;
};

/// Left join of survey rows to transcripts on the g4r_pid column. Every
/// survey row and column is kept in order; the 2K message columns are
/// appended. Throws Error(MissingKeyColumn) or Error(DuplicateSurveyKey),
/// the latter naming the 1-based file row numbers involved.
MergeResult merge_with_survey(const WideTable& wide, const csv::Table& survey, const MergeOptions& options = {});

}  // namespace g4r
