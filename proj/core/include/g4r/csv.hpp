#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace g4r::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;

  friend bool operator==(const Table&, const Table&) = default;
};

/// Quotes a field only when it holds a comma, quote, CR or LF; embedded
/// quotes are doubled.
std::string escape_field(std::string_view field);

/// Appends one CRLF-terminated record.
void append_row(std::string& out, const Row& row);

std::string write(const Table& table);

/// RFC 4180 reader. Accepts CRLF or LF record ends, a leading UTF-8 BOM,
/// and a missing final line break. Throws Error(MalformedInput) on an
/// unterminated quoted field or stray text after a closing quote.
std::vector<Row> parse_rows(std::string_view text);

/// First record becomes the header. Empty input yields an empty table.
Table parse(std::string_view text);

}  // namespace g4r::csv
