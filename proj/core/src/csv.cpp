#include "g4r/csv.hpp"

#include "g4r/error.hpp"

namespace g4r::csv {

std::string escape_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void append_row(std::string& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += escape_field(row[i]);
  }
  out += "\r\n";
}

std::string write(const Table& table) {
  std::string out;
  append_row(out, table.header);
  for (const auto& row : table.rows) append_row(out, row);
  return out;
}

std::vector<Row> parse_rows(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<Row> rows;
  Row row;
  std::string field;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  bool record_started = false;

  auto end_record = [&] {
    row.push_back(std::move(field));
    field.clear();
    rows.push_back(std::move(row));
    row.clear();
    record_started = false;
  };

  while (i < n) {
    record_started = true;
    if (text[i] == '"' && field.empty()) {
      const auto start_line = line;
      ++i;
      for (;;) {
        if (i >= n) {
          throw Error(ErrorCode::MalformedInput, "unterminated quoted field starting on line " + std::to_string(start_line));
        }
        const char c = text[i++];
        if (c == '"') {
          if (i < n && text[i] == '"') {
            field += '"';
            ++i;
          } else {
            break;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
        }
      }
      if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        throw Error(ErrorCode::MalformedInput, "unexpected text after closing quote on line " + std::to_string(line));
      }
      continue;
    }
    const char c = text[i];
    if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      ++i;
    } else if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
      end_record();
      i += 2;
      ++line;
    } else if (c == '\n') {
      end_record();
      ++i;
      ++line;
    } else {
      field += c;
      ++i;
    }
  }
  if (record_started) end_record();
  return rows;
}

Table parse(std::string_view text) {
  auto rows = parse_rows(text);
  Table table;
  if (rows.empty()) return table;
  table.header = std::move(rows.front());
  table.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
  return table;
}

}  // namespace g4r::csv
