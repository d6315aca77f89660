#pragma once

// Reference implementation of the manual merge procedure, written without
// the library: number each participant's messages in file order, find the
// largest count K, add K column pairs, then for every survey row scan the
// whole message list for rows with the same id.

#include <cstddef>
#include <string>
#include <vector>

namespace g4r::oracle {

struct Message {
  std::string pid;
  std::string to_gpt;
  std::string from_gpt;
  std::string timestamp;
};

struct Survey {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Merged {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> unmatched;
};

inline Merged merge(const std::vector<Message>& messages, const Survey& survey, std::size_t skip_rows) {
  std::size_t key = survey.header.size();
  for (std::size_t c = 0; c < survey.header.size(); ++c) {
    if (survey.header[c] == "g4r_pid") key = c;
  }

  std::size_t k_max = 0;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < messages.size(); ++j) {
      if (messages[j].pid == messages[i].pid) ++count;
    }
    if (count > k_max) k_max = count;
  }

  Merged out;
  out.header = survey.header;
  for (std::size_t n = 1; n <= k_max; ++n) {
    out.header.push_back("message_to_gpt_" + std::to_string(n));
    out.header.push_back("message_from_gpt_" + std::to_string(n));
  }

  for (std::size_t r = 0; r < survey.rows.size(); ++r) {
    std::vector<std::string> row = survey.rows[r];
    while (row.size() < survey.header.size()) row.push_back("");
    std::vector<std::string> cells(2 * k_max);
    if (r >= skip_rows && !row[key].empty()) {
      std::size_t n = 0;
      for (std::size_t j = 0; j < messages.size(); ++j) {
        if (messages[j].pid != row[key]) continue;
        cells[2 * n] = messages[j].to_gpt;
        cells[2 * n + 1] = messages[j].from_gpt;
        ++n;
      }
    }
    row.insert(row.end(), cells.begin(), cells.end());
    out.rows.push_back(row);
  }

  for (std::size_t i = 0; i < messages.size(); ++i) {
    bool seen_before = false;
    for (std::size_t j = 0; j < i; ++j) {
      if (messages[j].pid == messages[i].pid) seen_before = true;
    }
    if (seen_before) continue;
    bool in_survey = false;
    for (std::size_t r = skip_rows; r < survey.rows.size(); ++r) {
      if (key < survey.rows[r].size() && survey.rows[r][key] == messages[i].pid) in_survey = true;
    }
    if (!in_survey) out.unmatched.push_back(messages[i].pid);
  }
  return out;
}

/// Minimal RFC 4180 writer: quote when needed, double quotes, CRLF.
inline std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  auto field = [](const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += field(cells[i]);
    }
    return s + "\r\n";
  };
  std::string out = line(header);
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace g4r::oracle
