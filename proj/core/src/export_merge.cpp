#include "g4r/export_merge.hpp"

#include <algorithm>
#include <unordered_map>

#include "g4r/error.hpp"

namespace g4r {

const csv::Row& export_header() {
  static const csv::Row header{"participant_id", "message_to_gpt", "message_from_gpt", "timestamp"};
  return header;
}

std::vector<ExportRow> to_export_rows(std::span<const TranscriptEntry> transcript) {
  std::vector<ExportRow> rows;
  rows.reserve(transcript.size());
  for (const auto& entry : transcript) {
    rows.push_back({entry.participant_id, entry.exchange.participant_message, entry.exchange.gpt_message,
                    format_timestamp(entry.exchange.exchanged_at)});
  }
  return rows;
}

std::string export_csv(std::span<const ExportRow> rows) {
  std::string out;
  csv::append_row(out, export_header());
  for (const auto& r : rows) csv::append_row(out, {r.participant_id, r.message_to_gpt, r.message_from_gpt, r.timestamp});
  return out;
}

std::vector<ExportRow> parse_export_csv(std::string_view text) {
  const auto table = csv::parse(text);
  const auto& header = table.header;
  std::vector<std::size_t> index;
  for (const auto& name : export_header()) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MalformedInput, "message file has no \"" + name + "\" column");
    index.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  const auto needed = *std::max_element(index.begin(), index.end()) + 1;
  std::vector<ExportRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    if (r.size() < needed) {
      throw Error(ErrorCode::MalformedInput, "message file row " + std::to_string(i + 2) + " has too few columns");
    }
    rows.push_back({r[index[0]], r[index[1]], r[index[2]], r[index[3]]});
  }
  return rows;
}

std::string to_gpt_column(std::size_t n) { return "message_to_gpt_" + std::to_string(n); }
std::string from_gpt_column(std::size_t n) { return "message_from_gpt_" + std::to_string(n); }

WideTable pivot_wide(std::span<const ExportRow> rows) {
  WideTable wide;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& r : rows) {
    auto [it, inserted] = slot.try_emplace(r.participant_id, wide.records.size());
    if (inserted) wide.records.push_back({r.participant_id, {}});
    auto& record = wide.records[it->second];
    record.exchanges.push_back({r.message_to_gpt, r.message_from_gpt, r.timestamp});
    wide.width = std::max(wide.width, record.exchanges.size());
  }
  return wide;
}

std::vector<ExportRow> flatten(const WideTable& wide) {
  std::vector<ExportRow> rows;
  for (const auto& record : wide.records) {
    for (const auto& x : record.exchanges) {
      rows.push_back({record.g4r_pid, x.message_to_gpt, x.message_from_gpt, x.timestamp});
    }
  }
  return rows;
}

namespace {

void append_message_columns(csv::Row& header, std::size_t width) {
  for (std::size_t n = 1; n <= width; ++n) {
    header.push_back(to_gpt_column(n));
    header.push_back(from_gpt_column(n));
  }
}

void append_message_cells(csv::Row& row, const WideRecord* record, std::size_t width) {
  for (std::size_t n = 0; n < width; ++n) {
    if (record && n < record->exchanges.size()) {
      row.push_back(record->exchanges[n].message_to_gpt);
      row.push_back(record->exchanges[n].message_from_gpt);
    } else {
      row.emplace_back();
      row.emplace_back();
    }
  }
}

}  // namespace

csv::Table wide_to_table(const WideTable& wide) {
  csv::Table table;
  table.header.push_back(std::string(kSurveyKeyColumn));
  append_message_columns(table.header, wide.width);
  for (const auto& record : wide.records) {
    csv::Row row{record.g4r_pid};
    append_message_cells(row, &record, wide.width);
    table.rows.push_back(std::move(row));
  }
  return table;
}

MergeResult merge_with_survey(const WideTable& wide, const csv::Table& survey, const MergeOptions& options) {
  const auto key_it = std::find(survey.header.begin(), survey.header.end(), kSurveyKeyColumn);
  if (key_it == survey.header.end()) {
    throw Error(ErrorCode::MissingKeyColumn, "survey file has no \"" + std::string(kSurveyKeyColumn) + "\" column");
  }
  const auto key_col = static_cast<std::size_t>(key_it - survey.header.begin());
  const auto columns = survey.header.size();
  // File row numbers: the header is row 1, so data row i is row i + 2.
  auto file_row = [](std::size_t i) { return i + 2; };

  std::unordered_map<std::string, std::size_t> first_row;
  std::string duplicates;
  for (std::size_t i = options.skip_rows; i < survey.rows.size(); ++i) {
    const auto& row = survey.rows[i];
    if (key_col >= row.size() || row[key_col].empty()) continue;
    auto [it, inserted] = first_row.try_emplace(row[key_col], i);
    if (!inserted) {
      if (!duplicates.empty()) duplicates += "; ";
      duplicates += "\"" + row[key_col] + "\" on rows " + std::to_string(file_row(it->second)) + " and " +
                    std::to_string(file_row(i));
    }
  }
  if (!duplicates.empty()) throw Error(ErrorCode::DuplicateSurveyKey, "duplicate g4r_pid values: " + duplicates);

  std::unordered_map<std::string_view, const WideRecord*> by_pid;
  for (const auto& record : wide.records) by_pid.emplace(record.g4r_pid, &record);

  MergeResult result;
  result.merged.header = survey.header;
  append_message_columns(result.merged.header, wide.width);
  result.merged.rows.reserve(survey.rows.size());
  for (std::size_t i = 0; i < survey.rows.size(); ++i) {
    csv::Row row = survey.rows[i];
    if (row.size() > columns) {
      throw Error(ErrorCode::MalformedInput,
                  "survey row " + std::to_string(file_row(i)) + " has more cells than the header");
    }
    row.resize(columns);
    const WideRecord* record = nullptr;
    if (i >= options.skip_rows && !row[key_col].empty()) {
      if (const auto it = by_pid.find(row[key_col]); it != by_pid.end()) record = it->second;
    }
    append_message_cells(row, record, wide.width);
    result.merged.rows.push_back(std::move(row));
  }
  for (const auto& record : wide.records) {
    if (!first_row.contains(record.g4r_pid)) result.unmatched.push_back(record.g4r_pid);
  }
  return result;
}

}  // namespace g4r
