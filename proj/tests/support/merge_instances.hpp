#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "merge_oracle.hpp"

namespace g4r::oracle {

struct Instance {
  std::vector<Message> messages;  // long export, file order
  Survey survey;
  std::size_t skip_rows = 0;
};

/// Up to 20 participants with up to 6 exchanges each; payloads mix unicode,
/// commas, quotes and line breaks. Some participants have no survey row and
/// some survey rows have no transcript.
inline Instance random_instance(std::uint32_t seed) {
  std::mt19937 rng(seed);
  const std::vector<std::string> atoms{"hi",   ",",  "\"", "\n", "\r\n", " ",  "caf\xC3\xA9", "\xE2\x82\xAC",
                                       "\xF0\x9F\x98\x80", "\xE4\xBD\xA0\xE5\xA5\xBD", "a, b", "'", ";", "\t"};
  auto text = [&] {
    std::string s;
    const auto n = 1 + rng() % 5;
    for (std::size_t i = 0; i < n; ++i) s += atoms[rng() % atoms.size()];
    return s;
  };
  auto pid = [&](std::size_t i) { return "P" + std::to_string(seed) + "x" + std::to_string(i); };

  Instance inst;
  const std::size_t participants = rng() % 21;
  std::vector<std::vector<Message>> per_pid(participants);
  for (std::size_t p = 0; p < participants; ++p) {
    const auto count = rng() % 7;
    for (std::size_t k = 0; k < count; ++k) {
      per_pid[p].push_back({pid(p), text(), text(),
                            "2025-01-0" + std::to_string(1 + p % 9) + "T00:00:0" + std::to_string(k) + ".000Z"});
    }
  }
  // Interleave participants while keeping each one's own order.
  std::vector<std::size_t> cursor(participants, 0);
  for (;;) {
    std::vector<std::size_t> open;
    for (std::size_t p = 0; p < participants; ++p) {
      if (cursor[p] < per_pid[p].size()) open.push_back(p);
    }
    if (open.empty()) break;
    const auto p = open[rng() % open.size()];
    inst.messages.push_back(per_pid[p][cursor[p]++]);
  }

  inst.skip_rows = rng() % 2 ? 2 : 0;
  inst.survey.header = {"ResponseId", "Q1", "g4r_pid", "Q2 \"quoted\", with comma"};
  for (std::size_t s = 0; s < inst.skip_rows; ++s) {
    inst.survey.rows.push_back({"{\"ImportId\":\"meta" + std::to_string(s) + "\"}", "Question 1", "g4r_pid", "Q2"});
  }
  std::vector<std::string> keys;
  for (std::size_t p = 0; p < participants; ++p) {
    if (rng() % 5 != 0) keys.push_back(pid(p));
  }
  const auto extra = rng() % 4;
  for (std::size_t e = 0; e < extra; ++e) keys.push_back("S" + std::to_string(seed) + "y" + std::to_string(e));
  std::shuffle(keys.begin(), keys.end(), rng);
  if (rng() % 3 == 0) keys.push_back("");  // a respondent who never reached the chat
  for (std::size_t r = 0; r < keys.size(); ++r) {
    inst.survey.rows.push_back({"R_" + std::to_string(r), text(), keys[r], text()});
  }
  return inst;
}

}  // namespace g4r::oracle
